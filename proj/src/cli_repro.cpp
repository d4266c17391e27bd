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

// Registry of reproduction targets: one fixed parameter set per figure panel
// or table, plus the checks that can be made against printed values.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "sirnc/cli.hpp"

namespace sirnc::cli {

namespace {

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

Check within(const std::string& name, double value, double lo, double hi)
{
    return {name, value >= lo && value <= hi, fmt(value) + " in [" + fmt(lo) + ", " + fmt(hi) + "]"};
}

// Row of `col` in `curve` whose first column is nearest to x.
double lookup(const Curve& curve, std::size_t col, double x)
{
    const auto& xs = curve.data.at(0);
    std::size_t best = 0;
    for (std::size_t k = 1; k < xs.size(); ++k) {
        if (std::abs(xs[k] - x) < std::abs(xs[best] - x)) {
            best = k;
        }
    }
    return curve.data.at(col).at(best);
}

KeyValues vital_case(double kappa, double upsilon)
{
    return {{"kappa", fmt(kappa)}, {"upsilon1", fmt(upsilon)}, {"upsilon2", fmt(upsilon)}};
}

const KeyValues kBirthsExcess = vital_case(0.0002, 0.0012);
const KeyValues kBalanced = vital_case(0.0, 0.001);
const KeyValues kDeathsExcess = vital_case(-0.0002, 0.0008);

KeyValues merge(KeyValues a, const KeyValues& b)
{
    for (const auto& [k, v] : b) {
        a[k] = v;
    }
    return a;
}

std::vector<KeyValues> sweep(const std::string& key, const std::vector<std::string>& values)
{
    std::vector<KeyValues> out;
    for (const auto& v : values) {
        out.push_back({{key, v}});
    }
    return out;
}

void no_level_change(const std::vector<Bundle>& runs, Bundle& out)
{
    for (std::size_t k = 0; k < runs.size(); ++k) {
        const double changes = runs[k].scalar("level_changes");
        out.checks.push_back({"run " + std::to_string(k + 1) + " keeps the natural contact level", changes == 0.0,
                              fmt(changes) + " level changes"});
    }
}

std::vector<ReproTarget> build_targets()
{
    std::vector<ReproTarget> t;

    for (const auto& [id, n, horizon] : {std::tuple{"fig1a", "9999", "200"}, std::tuple{"fig1b", "99999", "250"}}) {
        t.push_back({id, "SIR vs SIR-NC trajectories, N = " + std::string(id == std::string("fig1a") ? "10,000" : "100,000"),
                     "compare-sir",
                     {{"lambda", "0.25"}, {"gamma", "1/15"}, {"s0", n}, {"i0", "1"}, {"horizon", horizon}},
                     {},
                     nullptr});
    }

    t.push_back({"fig2", "normalized peak I_max / N against rho for SIR and SIR-NC", "peak-sweep",
                 {{"variable", "rho"}, {"start", "0.01"}, {"stop", "0.99"}, {"points", "99"}},
                 {},
                 [](const std::vector<Bundle>& runs, Bundle& out) {
                     const Curve& c = runs.at(0).curves.at(0);
                     std::size_t bad = 0;
                     for (std::size_t k = 0; k < c.rows(); ++k) {
                         bad += c.data[2][k] >= c.data[1][k] ? 0 : 1;
                     }
                     out.checks.push_back({"SIR-NC peak at or above SIR peak at every rho", bad == 0,
                                           std::to_string(bad) + " violations"});
                 }});

    t.push_back({"fig3", "T_max and I_max against extra removal gamma1", "peak-sweep",
                 {{"variable", "gamma1"}, {"start", "0"}, {"stop", "0.2"}, {"points", "201"}, {"s0", "9999"}},
                 {},
                 [](const std::vector<Bundle>& runs, Bundle& out) {
                     const Curve& c = runs.at(0).curves.at(0);
                     const double i0 = lookup(c, 2, 0.0);
                     const double t0 = lookup(c, 1, 0.0);
                     out.checks.push_back(within("gamma1 = 0.07 halves I_max", lookup(c, 2, 0.07) / i0, 0.45, 0.55));
                     out.checks.push_back(
                         within("gamma1 = 0.11 doubles T_max", lookup(c, 1, 0.11) / t0, 2.0 * 0.85, 1e300));
                 }});

    const KeyValues lockdown{{"lockdown_factor", "0.5"}, {"lockdown_duration", "20"}, {"horizon", "250"}};
    const std::vector<std::string> starts{"15", "25", "40", "48"};
    t.push_back({"fig4a", "I(t) under a lockdown window (a = 0.5, T = 20) for several start times", "trajectory",
                 lockdown, sweep("lockdown_start", starts),
                 [](const std::vector<Bundle>& runs, Bundle& out) {
                     out.checks.push_back(within("early lockdown keeps I_max", runs.at(0).scalar("i_max") / 4523.0,
                                                 0.97, 1.03));
                     out.checks.push_back({"lockdown near the peak gives a second wave",
                                           runs.back().scalar("peaks") == 2.0, fmt(runs.back().scalar("peaks")) + " peaks"});
                 }});
    t.push_back({"fig4b", "I(t) with removal rate gamma (1 + b t)", "trajectory", {{"horizon", "250"}},
                 sweep("gamma_slope", {"0", "0.01", "0.02", "0.03"}), nullptr});
    t.push_back({"fig4c", "I(t) with a lockdown window and removal rate gamma (1 + 0.01 t)", "trajectory",
                 merge(lockdown, {{"gamma_slope", "0.01"}}), sweep("lockdown_start", starts), nullptr});

    const std::vector<std::string> cross{"0", "0.0025", "0.0125", "0.025"};
    const std::vector<std::string> scaled{"0", "0.01", "0.05", "0.1"};
    t.push_back({"fig5a", "two equal communities, symmetric cross infection", "communities",
                 {{"n_a", "10000"}, {"n_b", "10000"}}, sweep("lambda_cross", cross), nullptr});
    t.push_back({"fig5b", "communities of unequal size, symmetric cross infection", "communities",
                 {{"n_a", "5000"}, {"n_b", "10000"}}, sweep("lambda_cross", cross), nullptr});
    t.push_back({"fig5c", "communities with unequal infection rates, symmetric cross infection", "communities",
                 {{"n_a", "10000"}, {"n_b", "10000"}, {"lambda_a", "1/6"}, {"lambda_b", "1/3"}},
                 sweep("lambda_cross", cross), nullptr});
    t.push_back({"fig5d", "communities unequal in size and infection rate", "communities",
                 {{"n_a", "5000"}, {"n_b", "10000"}, {"lambda_a", "1/6"}, {"lambda_b", "1/3"}},
                 sweep("coupling", scaled), nullptr});

    t.push_back({"fig6a", "I(t) with imported infections for several nu", "imported", {{"horizon", "150"}},
                 sweep("nu", {"0", "0.00025", "0.0025", "0.0125"}),
                 [](const std::vector<Bundle>& runs, Bundle& out) {
                     out.checks.push_back(within("nu = 0 peak time", runs.at(0).scalar("t_max"), 54.4, 56.4));
                     out.checks.push_back(within("nu = 0.01 lambda peak time", runs.at(2).scalar("t_max"), 26.0, 32.0));
                 }});
    t.push_back({"fig6b", "T_max and I_max against nu", "peak-sweep",
                 {{"variable", "nu"}, {"start", "0"}, {"stop", "0.0125"}, {"points", "51"}, {"horizon", "200"}},
                 {}, nullptr});

    t.push_back({"fig8", "total infected in two asymmetric communities, lambda_ab = a lambda_a, lambda_ba = a lambda_b",
                 "communities",
                 {{"n_a", "5000"}, {"n_b", "10000"}, {"lambda_a", "1/6"}, {"lambda_b", "1/3"}},
                 sweep("coupling", {"0.001", "0.01", "0.05", "0.1"}),
                 [](const std::vector<Bundle>& runs, Bundle& out) {
                     const double weak = runs.front().scalar("humps_total");
                     const double strong = runs.back().scalar("humps_total");
                     out.checks.push_back({"weak coupling gives a double hump", weak == 2.0, fmt(weak) + " humps"});
                     out.checks.push_back({"strong coupling gives a single hump", strong == 1.0, fmt(strong) + " humps"});
                 }});

    const KeyValues short_run{{"horizon", "300"}, {"sample", "0.5"}};
    const KeyValues long_run{{"horizon", "3000"}, {"sample", "5"}};
    t.push_back({"fig9a", "births and deaths, excess births, short horizon", "vital", merge(short_run, kBirthsExcess), {}, nullptr});
    t.push_back({"fig9b", "births and deaths, balanced, short horizon", "vital", merge(short_run, kBalanced), {}, nullptr});
    t.push_back({"fig9c", "births and deaths, excess deaths, short horizon", "vital", merge(short_run, kDeathsExcess), {}, nullptr});
    t.push_back({"fig9d", "births and deaths, excess births, long horizon", "vital", merge(long_run, kBirthsExcess), {}, nullptr});
    t.push_back({"fig9e", "births and deaths, balanced, long horizon", "vital", merge(long_run, kBalanced), {}, nullptr});
    t.push_back({"fig9f", "births and deaths, excess deaths, long horizon", "vital", merge(long_run, kDeathsExcess), {}, nullptr});
    t.push_back({"fig10", "I(t) over the long horizon for the three birth / death cases", "vital", long_run,
                 {kBirthsExcess, kBalanced, kDeathsExcess},
                 [](const std::vector<Bundle>& runs, Bundle& out) {
                     const double printed[] = {219.0, 102.0, 50.0};
                     for (std::size_t k = 0; k < 3; ++k) {
                         out.checks.push_back(within("I(3000) case " + std::to_string(k + 1),
                                                     runs.at(k).scalar("i_end"), 0.85 * printed[k], 1.15 * printed[k]));
                     }
                 }});

    const auto control_variants = [](const std::string& lo, const std::string& hi) {
        std::vector<KeyValues> v;
        for (const auto& a3 : {lo, hi}) {
            for (const char* mode : {"ramp", "constant"}) {
                v.push_back({{"a3", a3}, {"alpha_mode", mode}});
            }
        }
        return v;
    };
    t.push_back({"fig11", "MPC controlled I(t), gamma(t) and per-slot cost, a3 = 1.0 and 1.2", "control-mpc", {},
                 control_variants("1.0", "1.2"), no_level_change});
    t.push_back({"fig12", "MPC controlled I(t), gamma(t) and per-slot cost, a3 = 1.35 and 1.5", "control-mpc", {},
                 control_variants("1.35", "1.5"), no_level_change});

    std::vector<KeyValues> table_runs;
    for (const char* n : {"999", "9999", "99999"}) {
        for (const auto& [lam, gam] : {std::pair{"0.1", "0.05"}, std::pair{"0.2", "0.05"}, std::pair{"0.2", "0.1"}}) {
            table_runs.push_back({{"s0", n}, {"lambda", lam}, {"gamma", gam}});
        }
    }
    t.push_back({"table1", "peak times of SIR and SIR-NC for three populations and three rate pairs", "compare-sir",
                 {{"horizon", "400"}, {"sample", "1"}}, table_runs,
                 [](const std::vector<Bundle>& runs, Bundle& out) {
                     const double printed[9][2] = {{135, 138}, {54, 53}, {68, 69},  {181, 184}, {70, 69},
                                                   {91, 92},   {228, 230}, {85, 84}, {114, 115}};
                     const double ns[3] = {1000, 10000, 100000};
                     const double rates[3][2] = {{0.1, 0.05}, {0.2, 0.05}, {0.2, 0.1}};
                     Curve c;
                     c.name = "table1";
                     c.panel = "table1";
                     std::vector<std::vector<double>> cols(7);
                     for (std::size_t k = 0; k < 9; ++k) {
                         const double sir = runs.at(k).scalar("t_max_sir");
                         const double nc = runs.at(k).scalar("t_max_sirnc");
                         const double row[7] = {ns[k / 3], rates[k % 3][0], rates[k % 3][1], sir, nc, printed[k][0],
                                                printed[k][1]};
                         for (std::size_t j = 0; j < 7; ++j) {
                             cols[j].push_back(row[j]);
                         }
                         const std::string tag = "N = " + fmt(ns[k / 3]) + ", (" + fmt(rates[k % 3][0]) + ", " +
                                                 fmt(rates[k % 3][1]) + ")";
                         out.checks.push_back(within("SIR T_max " + tag, sir, printed[k][0] - 2, printed[k][0] + 2));
                         out.checks.push_back(within("SIR-NC T_max " + tag, nc, printed[k][1] - 2, printed[k][1] + 2));
                         out.checks.push_back(within("SIR and SIR-NC T_max agree " + tag, std::abs(sir - nc), 0.0, 4.0));
                     }
                     const char* names[7] = {"n", "lambda", "gamma", "t_max_sir", "t_max_sirnc", "printed_sir",
                                             "printed_sirnc"};
                     for (std::size_t j = 0; j < 7; ++j) {
                         c.add_column(names[j], cols[j]);
                     }
                     out.curves.insert(out.curves.begin(), std::move(c));
                 }});
    return t;
}

}  // namespace

const std::vector<std::string>& repro_ids()
{
    static const std::vector<std::string> ids = {
        "fig1a", "fig1b", "fig2",  "fig3",  "fig4a", "fig4b", "fig4c", "fig5a", "fig5b", "fig5c", "fig5d",
        "fig6a", "fig6b", "fig8",  "fig9a", "fig9b", "fig9c", "fig9d", "fig9e", "fig9f", "fig10", "fig11",
        "fig12", "table1"};
    return ids;
}

const std::vector<ReproTarget>& repro_targets()
{
    static const std::vector<ReproTarget> all = build_targets();
    return all;
}

const ReproTarget& find_target(std::string_view id)
{
    for (const auto& t : repro_targets()) {
        if (t.id == id) {
            return t;
        }
    }
    std::string known;
    for (const auto& i : repro_ids()) {
        known += (known.empty() ? "" : " ") + i;
    }
    throw Error(ErrorCode::SpecError, "unknown reproduction target '" + std::string(id) + "' (known: " + known + ")");
}

Bundle reproduce(const ReproTarget& target, const RunContext& ctx)
{
    const CommandInfo& info = command_info(target.command);
    const std::vector<KeyValues> variants = target.variants.empty() ? std::vector<KeyValues>{{}} : target.variants;
    std::vector<Bundle> runs;
    Bundle out;
    for (std::size_t k = 0; k < variants.size(); ++k) {
        const Params params = Params::resolve(info, merge(target.params, variants[k]));
        Bundle run = run_command(target.command, params, ctx);
        const std::string prefix = variants.size() > 1 ? target.id + "_" + std::to_string(k + 1) : target.id;
        Bundle renamed;
        for (Curve c : run.curves) {
            c.name = prefix + "_" + c.name;
            c.panel = target.id;
            renamed.curves.push_back(std::move(c));
        }
        for (const auto& [name, v] : run.scalars) {
            renamed.scalars.emplace_back(variants.size() > 1 ? "run" + std::to_string(k + 1) + "." + name : name, v);
        }
        renamed.warnings = run.warnings;
        renamed.blobs = run.blobs;
        out.append(std::move(renamed));
        if (run.soft_error && !out.soft_error) {
            out.soft_error = run.soft_error;
        }
        runs.push_back(std::move(run));
    }
    if (target.post) {
        target.post(runs, out);
    }
    return out;
}

}  // namespace sirnc::cli
