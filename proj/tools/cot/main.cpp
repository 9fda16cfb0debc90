// Copyright 2026-present the cot project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <iostream>
#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Constrained optimal transport estimation and pricing"};
  app.require_subcommand(1);

  cot::cli::Invocation inv;
  int threads = 0;
  std::string out;
  const std::pair<const char*, const char*> commands[] = {
      {"estimate", "Estimate the target measure (method from the config)"},
      {"analytic", "Closed-form OT solution"},
      {"kl", "KL-divergence baseline"},
      {"price", "Price exotic options under the prior"},
      {"compare", "Calibrate every method to vanilla quotes and price exotics"},
      {"gen-samples", "Draw prior samples to CSV"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", inv.config_path, "JSON run config")->required();
    sub->add_option("--threads", threads, "Solver threads (default 1)");
    sub->add_option("--out", out, "Output directory, overrides output_dir");
    sub->callback([&inv, sub] { inv.command = sub->get_name(); });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const CLI::ParseError& e) {
    std::cerr << nlohmann::json{{"error", "UsageError"}, {"message", e.what()}}.dump()
              << std::endl;
    return cot::cli::kError;
  }
  if (threads != 0) inv.threads = threads;
  if (!out.empty()) inv.out = out;
  return cot::cli::run(inv);
}
