/*
 Copyright 2026 The sirnc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include <iomanip>
#include <iostream>

#include "CLI11.hpp"
#include "sirnc/cli.hpp"

namespace {

void add_common(CLI::App* sub, sirnc::cli::Invocation& inv, std::string& spec, double& step)
{
    sub->add_option("--spec", spec, "key = value run spec file");
    sub->add_option("--out", inv.out_dir, "output directory")->capture_default_str();
    sub->add_option("--seed", inv.seed, "random seed")->capture_default_str();
    sub->add_flag("--quiet", inv.quiet, "print nothing on success");
    sub->add_option("--step", step, "override the command's step parameter");
}

void print_schema(const sirnc::cli::CommandInfo& info)
{
    std::cout << info.name << ": " << info.summary << "\n";
    for (const auto& p : info.params) {
        std::cout << "  " << std::left << std::setw(20) << p.key << std::setw(14)
                  << (p.default_value.empty() ? "(none)" : p.default_value) << p.doc << "\n";
    }
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"SIR-NC epidemic toolkit: closed forms, variants, control and figure data"};
    app.require_subcommand(1);

    sirnc::cli::Invocation inv;
    std::string spec;
    double step = 0.0;
    bool schema = false;

    for (const auto& info : sirnc::cli::commands()) {
        CLI::App* sub = app.add_subcommand(info.name, info.summary);
        add_common(sub, inv, spec, step);
        sub->add_option("--set", inv.overrides, "key=value parameter override (repeatable)");
        sub->add_flag("--schema", schema, "print the parameter schema and exit");
    }
    CLI::App* rep = app.add_subcommand("reproduce", "write the data behind one figure panel or table");
    add_common(rep, inv, spec, step);
    rep->add_option("target", inv.target, "target id")->required();
    rep->add_flag("--check", inv.check, "exit with status 4 when a check against printed values fails");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : sirnc::cli::kExitSpec;
    }

    inv.command = app.get_subcommands().front()->get_name();
    if (schema) {
        print_schema(sirnc::cli::command_info(inv.command));
        return 0;
    }
    if (!spec.empty()) {
        inv.spec = spec;
    }
    if (app.get_subcommands().front()->count("--step") > 0) {
        inv.step = step;
    }
    return sirnc::cli::run(inv);
}
