// Copyright 2026 The heraldsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// heraldsim: theory sweeps, Monte Carlo click records, dataset analysis and self-checks.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "heraldsim/analysis.hpp"
#include "heraldsim/error.hpp"
#include "heraldsim/mcsim.hpp"
#include "heraldsim/protocol.hpp"
#include "heraldsim/records.hpp"
#include "heraldsim/table.hpp"
#include "heraldsim/verify.hpp"

using namespace heraldsim;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_check_failed = 1;
constexpr int exit_invalid = 2;
constexpr int exit_numerical = 3;
constexpr int exit_insufficient = 4;
constexpr int exit_io = 5;

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_argument:
            return exit_invalid;
        case ErrorKind::insufficient_data:
            return exit_insufficient;
        case ErrorKind::io:
            return exit_io;
        default:
            return exit_numerical;
    }
}

/// Physical parameters shared by the subcommands.
struct ModelOptions {
    int herald_bins = 4;
    int signal_bins = 8;
    double eta = 0.38;
    double eta_prime = 0.36;
    std::vector<double> eta_loop;  // empty: fitted default for the pass count
    bool lossless = false;

    void add_to(CLI::App *cmd) {
        cmd->add_option("--herald-bins", herald_bins, "Herald detector bins N'")->capture_default_str();
        cmd->add_option("--signal-bins", signal_bins, "Signal detector bins N")->capture_default_str();
        cmd->add_option("--eta", eta, "Signal detection efficiency")->capture_default_str();
        cmd->add_option("--eta-prime", eta_prime, "Herald detection efficiency")->capture_default_str();
        cmd->add_option("--eta-loop", eta_loop,
                        "Loop survival per round trip: one value or one per round trip "
                        "(default 0.60 for t<=2, 0.55 for t=3, 0.52 for t>=4)")
            ->delimiter(',');
        cmd->add_flag("--lossless", lossless, "Perfect detectors and loop");
    }

    LoopConfig config(double zeta, int passes) const {
        require(std::isfinite(eta) && eta >= 0 && eta <= 1, "--eta must lie in [0, 1]");
        require(std::isfinite(eta_prime) && eta_prime >= 0 && eta_prime <= 1, "--eta-prime must lie in [0, 1]");
        LoopConfig cfg;
        cfg.squeeze = {gain_from_zeta(zeta)};
        cfg.herald = {herald_bins, lossless ? 1.0 : eta_prime};
        cfg.signal = {signal_bins, lossless ? 1.0 : eta};
        if (!lossless) {
            cfg.loop_eff = eta_loop.empty() ? std::vector<double>{default_loop_efficiency(passes)} : eta_loop;
        }
        cfg.herald.validate();
        cfg.signal.validate();
        return cfg;
    }
};

int default_threads() {
    const char *env = std::getenv("HERALDSIM_THREADS");
    if (!env || !*env) {
        return 1;
    }
    try {
        std::size_t used = 0;
        int n = std::stoi(env, &used);
        require(used == std::string(env).size() && n >= 1, "");
        return n;
    } catch (...) {
        fail(ErrorKind::invalid_argument, std::string("HERALDSIM_THREADS must be a positive integer, got '") + env + "'");
    }
}

/// Output file or stdout.
class Output {
   public:
    explicit Output(const std::string &path) {
        if (path.empty() || path == "-") {
            return;
        }
        file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
        if (!*file_) {
            fail(ErrorKind::io, "cannot open '" + path + "' for writing");
        }
    }
    std::ostream &stream() {
        return file_ ? static_cast<std::ostream &>(*file_) : std::cout;
    }
    void close() {
        stream().flush();
        if (!stream()) {
            fail(ErrorKind::io, "failed writing output");
        }
    }

   private:
    std::unique_ptr<std::ofstream> file_;
};

std::vector<double> parse_distribution(const std::string &text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            require(used == item.size(), "");
        } catch (...) {
            fail(ErrorKind::invalid_argument, "malformed --target entry '" + item + "'");
        }
    }
    return out;
}

struct TargetOptions {
    std::string convention = "b";
    std::string custom;

    void add_to(CLI::App *cmd) {
        cmd->add_option("--fidelity", convention,
                        "Fidelity target: a = ideal detectors, b = signal detector losses, c = custom (--target)")
            ->capture_default_str();
        cmd->add_option("--target", custom, "Custom target click distribution c_0,...,c_N for --fidelity c");
    }

    FidelityTarget target() const {
        FidelityTarget t;
        t.convention = parse_fidelity_convention(convention);
        if (t.convention == FidelityConvention::custom) {
            require(!custom.empty(), "--fidelity c needs --target");
            t.custom = to_click_distribution(parse_distribution(custom));
            double total = t.custom.total();
            require(std::abs(total - 1.0) <= 1e-9, "custom target must sum to 1");
        } else {
            require(custom.empty(), "--target is only used with --fidelity c");
        }
        return t;
    }
};

// ---------------------------------------------------------------------------------------------

struct TheoryArgs {
    ModelOptions model;
    TargetOptions target;
    int n = 0;
    std::string pattern;
    std::vector<double> zeta;
    std::string grid;
    std::string output;
    std::string format = "csv";
    int threads = 0;
};

int cmd_theory(const TheoryArgs &a) {
    require((a.n > 0) != !a.pattern.empty(), "give exactly one of --n and --pattern");
    require(a.zeta.empty() != a.grid.empty(), "give exactly one of --zeta and --zeta-grid");
    std::vector<double> zetas = a.grid.empty() ? a.zeta : parse_zeta_grid(a.grid);
    require(!zetas.empty(), "empty zeta list");
    std::vector<double> sorted = zetas;
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), "zeta values must be distinct");
    for (double z : zetas) {
        gain_from_zeta(z);
    }
    FidelityTarget target = a.target.target();
    const int threads = a.threads > 0 ? a.threads : default_threads();

    std::vector<HeraldPattern> family;
    if (a.n > 0) {
        family = {HeraldPattern::direct(a.n), HeraldPattern::feedback(a.n)};
    } else {
        family = {HeraldPattern::parse(a.pattern)};
    }
    LoopConfig tmpl = a.model.config(sorted.front(), family.back().passes());
    Table table;
    if (a.n > 0) {
        table.columns = {"zeta", "gamma", "P_DH", "P_FH", "F_DH", "F_FH"};
    } else {
        table.columns = {"zeta", "gamma", "pattern", "n", "t", "P", "F"};
        for (int k = 0; k <= tmpl.signal.bins; ++k) {
            table.columns.push_back("c" + std::to_string(k));
        }
    }
    for (const auto &p : family) {
        tmpl.validate_for(p);
    }
    auto rows = sweep_fp(tmpl, family, sorted, target, threads);
    for (const auto &row : rows) {
        if (a.n > 0) {
            table.add_row({row.zeta, row.gamma, row.probability[0], row.probability[1], row.fidelity[0], row.fidelity[1]});
            continue;
        }
        LoopConfig cfg = tmpl;
        cfg.squeeze = {gain_from_zeta(row.zeta)};
        auto outcome = run_pattern<Wide>(cfg, family[0]);
        std::vector<Cell> cells{row.zeta,
                                row.gamma,
                                family[0].str(),
                                static_cast<std::int64_t>(family[0].photons()),
                                static_cast<std::int64_t>(family[0].passes()),
                                row.probability[0],
                                row.fidelity[0]};
        std::vector<double> c(static_cast<std::size_t>(cfg.signal.bins) + 1, std::numeric_limits<double>::quiet_NaN());
        if (outcome.heralded()) {
            c = signal_distribution(outcome.state, cfg.signal).probs;
        }
        for (double v : c) {
            cells.emplace_back(v);
        }
        table.add_row(std::move(cells));
    }
    nlohmann::json preamble{{"kind", "theory"},
                            {"config", to_json(tmpl)},
                            {"fidelity", fidelity_convention_name(target.convention)},
                            {"zeta", sorted}};
    if (a.n > 0) {
        preamble["n"] = a.n;
    } else {
        preamble["pattern"] = family[0].str();
    }
    if (target.convention == FidelityConvention::custom) {
        preamble["target"] = target.custom.probs;
    }
    Output out(a.output);
    emit_table(table, parse_table_format(a.format), out.stream(), preamble);
    out.close();
    return exit_ok;
}

// ---------------------------------------------------------------------------------------------

struct SimulateArgs {
    ModelOptions model;
    double zeta = 0.3;
    int t = 2;
    std::uint64_t shots = 0;
    std::optional<std::uint64_t> seed;
    std::string output;
    int threads = 0;
};

int cmd_simulate(const SimulateArgs &a) {
    require(a.shots >= 1, "--shots must be >= 1");
    LoopConfig cfg = a.model.config(a.zeta, a.t);
    std::uint64_t seed = a.seed ? *a.seed : (std::uint64_t{std::random_device{}()} << 32) ^ std::random_device{}();
    validate_sampling(cfg, a.t, a.shots);
    Output out(a.output);
    write_simulation(out.stream(), cfg, a.t, a.shots, seed, a.threads > 0 ? a.threads : default_threads());
    out.close();
    return exit_ok;
}

// ---------------------------------------------------------------------------------------------

struct AnalyzeArgs {
    TargetOptions target;
    std::string file;
    std::string patterns;
    bool check_oracle = false;
    int order = -1;
    std::string output;
    std::string format = "csv";
};

std::vector<HeraldPattern> parse_pattern_list(const std::string &text) {
    std::vector<HeraldPattern> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ';')) {
        if (item.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        out.push_back(HeraldPattern::parse(item));
    }
    require(!out.empty(), "--patterns lists no pattern");
    return out;
}

int cmd_analyze(const AnalyzeArgs &a) {
    RecordFile file = read_records(a.file);
    const int passes = file.records.passes();
    require(!file.records.empty(), "record file holds no records");
    std::vector<HeraldPattern> patterns;
    if (a.patterns.empty()) {
        for (auto &[p, h] : condition_all(file.records, file.config.signal.bins)) {
            patterns.push_back(p);
        }
    } else {
        patterns = parse_pattern_list(a.patterns);
    }
    for (const auto &p : patterns) {
        p.validate(file.config.herald.bins);
    }
    FidelityTarget target = a.target.target();
    Conditioner cond(patterns, passes, file.config.signal.bins);
    cond.add(file.records);

    std::vector<ResultRow> rows;
    for (std::size_t i = 0; i < patterns.size(); ++i) {
        auto res = cond.result(i);
        auto tgt = target_distribution(target, patterns[i].photons(), file.config.signal);
        ResultRow row = analyze_pattern(res, patterns[i], tgt);
        if (a.order >= 0 && row.status == "ok") {
            auto neg = estimate_negativity(res.hist, a.order);
            row.negativity = neg.value;
            row.sigma_N = neg.sigma;
            row.significance = neg.significance;
        }
        if (a.check_oracle) {
            auto chain = exact_chain(file.config, patterns[i], {}, {}, passes);
            row.extra.emplace_back("P_exact", chain.probability);
            row.extra.emplace_back("P_dev_sigma", row.sigma_P > 0 ? (row.P - chain.probability) / row.sigma_P
                                                                  : std::numeric_limits<double>::quiet_NaN());
            double f_exact = chain.probability > 0 ? bhattacharyya(chain.clicks, tgt)
                                                   : std::numeric_limits<double>::quiet_NaN();
            row.extra.emplace_back("F_exact", f_exact);
            row.extra.emplace_back("F_dev_sigma", row.sigma_F > 0 ? (row.F - f_exact) / row.sigma_F
                                                                  : std::numeric_limits<double>::quiet_NaN());
        }
        rows.push_back(std::move(row));
    }
    nlohmann::json preamble{{"kind", "analysis"},
                            {"source", a.file},
                            {"records", file.preamble},
                            {"fidelity", fidelity_convention_name(target.convention)},
                            {"check_oracle", a.check_oracle}};
    if (a.order >= 0) {
        preamble["order"] = a.order;
    }
    Output out(a.output);
    emit_table(results_table(rows), parse_table_format(a.format), out.stream(), preamble);
    out.close();
    bool any_ok = std::any_of(rows.begin(), rows.end(), [](const ResultRow &r) {
        return r.status == "ok";
    });
    return any_ok ? exit_ok : exit_insufficient;
}

// ---------------------------------------------------------------------------------------------

struct VerifyArgs {
    std::vector<int> only;
    std::uint64_t seed = 20260314;
    bool inject_fault = false;
    int threads = 0;
};

int cmd_verify(const VerifyArgs &a) {
    VerifyOptions opt;
    opt.only = a.only;
    opt.seed = a.seed;
    opt.threads = a.threads > 0 ? a.threads : default_threads();
    for (int id : a.only) {
        require(id >= 1 && id <= 11, "--only takes check numbers 1 to 11");
    }
    if (a.inject_fault) {
        // A pair-creation law with the geometric ratio inflated by 1%.
        opt.gain = [](int m, double lambda, int jmax) {
            return gain_kernel(m, std::min(lambda * 1.01, 0.999), jmax);
        };
    }
    nlohmann::json preamble{{"kind", "verify"}, {"seed", a.seed}, {"only", a.only}, {"fault", a.inject_fault}};
    std::cout << "# " << preamble.dump() << "\n";
    bool all = true;
    opt.progress = [&](const CheckResult &r) {
        all = all && r.passed;
        std::cout << format_check(r) << std::endl;
    };
    auto results = run_acceptance(opt);
    int failed = 0;
    for (const auto &r : results) {
        failed += r.passed ? 0 : 1;
    }
    std::cout << (failed == 0 ? "all checks passed" : std::to_string(failed) + " check(s) failed") << "\n";
    return failed == 0 ? exit_ok : exit_check_failed;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Heralded photon-number state generation: theory, sampling and analysis"};
    app.require_subcommand(1);

    TheoryArgs theory;
    auto *th = app.add_subcommand("theory", "Success probability, fidelity and click statistics from the model");
    theory.model.add_to(th);
    theory.target.add_to(th);
    th->add_option("--n", theory.n, "Photon number: compare direct and feedback heralding");
    th->add_option("--pattern", theory.pattern, "Single herald pattern, e.g. 1,1 or (2,0)");
    th->add_option("--zeta", theory.zeta, "Squeezing values (comma separated)")->delimiter(',');
    th->add_option("--zeta-grid", theory.grid, "Inclusive grid start:stop:step");
    th->add_option("-o,--output", theory.output, "Output file (default stdout)");
    th->add_option("--format", theory.format, "csv or json")->capture_default_str();
    th->add_option("--threads", theory.threads, "Worker threads (default HERALDSIM_THREADS or 1)");

    SimulateArgs sim;
    auto *sm = app.add_subcommand("simulate", "Sample shot-by-shot click records");
    sim.model.add_to(sm);
    sm->add_option("--zeta", sim.zeta, "Squeezing parameter")->capture_default_str();
    sm->add_option("--t", sim.t, "Passes through the source per shot")->capture_default_str();
    sm->add_option("--shots", sim.shots, "Number of shots")->required();
    sm->add_option("--seed", sim.seed, "64-bit seed (drawn and recorded in the preamble if omitted)");
    sm->add_option("-o,--output", sim.output, "Output file (default stdout)");
    sm->add_option("--threads", sim.threads, "Worker threads; output does not depend on it");

    AnalyzeArgs an;
    auto *az = app.add_subcommand("analyze", "Condition a record file on herald patterns and estimate");
    an.target.add_to(az);
    az->add_option("file", an.file, "Record file written by simulate")->required();
    az->add_option("--patterns", an.patterns, "Patterns separated by ';' (default: all observed)");
    az->add_flag("--check-oracle", an.check_oracle, "Append exact reference values and deviations in sigma");
    az->add_option("--order", an.order, "Moment matrix order (default N/2)");
    az->add_option("-o,--output", an.output, "Output file (default stdout)");
    az->add_option("--format", an.format, "csv or json")->capture_default_str();

    VerifyArgs ver;
    auto *vf = app.add_subcommand("verify", "Run the acceptance checks");
    vf->add_option("--only", ver.only, "Check numbers to run (comma separated)")->delimiter(',');
    vf->add_option("--seed", ver.seed, "Seed for the sampled checks")->capture_default_str();
    vf->add_option("--threads", ver.threads, "Sampling threads");
    vf->add_flag("--inject-gain-fault", ver.inject_fault, "Perturb the pair-creation law (harness self-test)")
        ->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return exit_invalid;
    }

    try {
        if (th->parsed()) {
            return cmd_theory(theory);
        }
        if (sm->parsed()) {
            return cmd_simulate(sim);
        }
        if (az->parsed()) {
            return cmd_analyze(an);
        }
        return cmd_verify(ver);
    } catch (const Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const nlohmann::json::exception &e) {
        std::cerr << "error: io: " << e.what() << "\n";
        return exit_io;
    } catch (const std::bad_alloc &) {
        std::cerr << "error: out of memory\n";
        return exit_numerical;
    }
}
