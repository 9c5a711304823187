// Command-line front end: pairwise decisions, clustering, the synthetic
// benchmark grid, classification bounds, and synthetic CSV export.
//
// Exit codes: 0 merge (or success), 1 keep separate, 2 error.

#include <CLI11.hpp>

#include <collab.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace collab;

namespace {

constexpr int kExitMerge = 0;
constexpr int kExitSeparate = 1;
constexpr int kExitError = 2;

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    int threads = 0;
    std::string target = "y";
    std::string mode;
    bool desk = false;
    std::string out_dir = ".";
};

Config load_config(const Common& c) {
    return c.config_path.empty() ? Config{} : Config::load(c.config_path);
}

// defaults (or the desk preset) < config file < flags
TunerConfig resolve_tuner(const Common& c, const Config& file) {
    TunerConfig t = c.desk ? TunerConfig::desk() : TunerConfig{};
    t.apply(file);
    if (c.seed) t.seed = *c.seed;
    if (!c.mode.empty()) t.mode = parse_merge_mode(c.mode);
    t.validate();
    return t;
}

void print_tuner(std::ostream& out, const TunerConfig& t) {
    out << "config seed=" << t.seed << " mode=" << to_string(t.mode) << " alpha_min=" << t.alpha_min
        << " alpha_max=" << t.alpha_max << " eta=" << t.eta << " max_iterations=" << t.max_iterations
        << " lambda_threshold=" << t.lambda_threshold << " subsample_n=" << t.subsample_n
        << " oos_count=" << t.oos_count << " boot_reps_m=" << t.boot_reps_m
        << " split_fraction=" << t.split_fraction << " moment_reps=" << t.moment_reps
        << " threads=" << max_threads() << "\n";
}

fs::path out_file(const Common& c, const std::string& name) {
    fs::create_directories(c.out_dir);
    return fs::path(c.out_dir) / name;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream f(p);
    if (!f) throw Error("cannot write " + p.string());
    f << std::setprecision(10);
    return f;
}

std::vector<Dataset> ingest_all(const std::vector<std::string>& paths, const std::string& target) {
    std::vector<Dataset> ds;
    for (const auto& path : paths) {
        ds.push_back(ingest_csv(path, target, fs::path(path).stem().string()));
        if (ds.back().feature_names != ds.front().feature_names) {
            throw DimensionError("feature columns of " + path + " differ from " + paths.front());
        }
    }
    return ds;
}

int run_decide_pair(const Common& c, const std::string& csv1, const std::string& csv2) {
    const auto t = resolve_tuner(c, load_config(c));
    print_tuner(std::cout, t);
    const auto ds = ingest_all({csv1, csv2}, c.target);
    const auto dec = decide_pair(ds[0], ds[1], t);
    std::cout << "merge " << (dec.merge ? "true" : "false") << "\n"
              << "mode " << to_string(dec.mode) << "\n"
              << "proxy_acc " << dec.proxy_acc << "\n"
              << "alpha_opt " << dec.alpha_opt << "\n"
              << "suggestion_rate " << dec.suggestion_rate << "\n"
              << "iterations " << dec.iterations << "\n"
              << "failed_trials " << dec.failed_trials << "\n"
              << "clamped_c0 " << dec.clamped_c0 << "\n";
    auto f = open_out(out_file(c, "decision.csv"));
    f << "dataset1,dataset2,merge,mode,proxy_acc,alpha_opt,suggestion_rate,iterations,failed_trials,clamped_c0\n"
      << ds[0].id << ',' << ds[1].id << ',' << (dec.merge ? 1 : 0) << ',' << to_string(dec.mode) << ','
      << dec.proxy_acc << ',' << dec.alpha_opt << ',' << dec.suggestion_rate << ',' << dec.iterations << ','
      << dec.failed_trials << ',' << dec.clamped_c0 << '\n';
    auto g = open_out(out_file(c, "alpha_accuracy.csv"));
    g << "alpha,correct,iterations\n";
    for (const auto& [alpha, correct] : dec.per_alpha_acc) g << alpha << ',' << correct << ',' << dec.iterations << '\n';
    return dec.merge ? kExitMerge : kExitSeparate;
}

int run_cluster(const Common& c, const std::vector<std::string>& csvs) {
    const auto t = resolve_tuner(c, load_config(c));
    print_tuner(std::cout, t);
    const auto ds = ingest_all(csvs, c.target);
    const auto part = greedy_cluster(ds, t);
    write_partition_report(part, ds, std::cout);
    auto f = open_out(out_file(c, "partition.csv"));
    write_partition_csv(part, ds, f);
    auto r = open_out(out_file(c, "cluster_report.txt"));
    write_partition_report(part, ds, r);
    const auto single = evaluate_partition(ds, Partition::singletons(ds.size()), t);
    std::cout << "singleton_total_ose " << single.total_ose << "\n";
    r << "singleton_total_ose " << single.total_ose << "\n";
    return kExitMerge;
}

int run_bench(const Common& c, bool mu_shift_flag) {
    const auto file = load_config(c);
    auto t = resolve_tuner(c, file);
    ExperimentGrid g = c.desk ? ExperimentGrid::desk() : ExperimentGrid{};
    g.apply(file);
    if (c.seed) g.seed = *c.seed;
    if (mu_shift_flag) g.mu_shift = true;
    g.validate();
    print_tuner(std::cout, t);
    const auto cells = run_grid(g, t);
    write_grid_text(std::cout, g, t, cells);
    auto f = open_out(out_file(c, "bench.csv"));
    write_grid_csv(f, g, t, cells);
    auto txt = open_out(out_file(c, "bench.txt"));
    write_grid_text(txt, g, t, cells);
    return kExitMerge;
}

struct ClassBoundArgs {
    double n1 = 100, n2 = 100;
    double lambda = 0.1, delta = 0.05, feature_bound = 1.0, margin = 0.1;
    int steps = 500;
    bool train = false;
};

int run_class_bound(const Common& c, ClassBoundArgs a) {
    const auto file = load_config(c);
    a.n1 = file.get_double("n1", a.n1);
    a.n2 = file.get_double("n2", a.n2);
    a.lambda = file.get_double("lambda", a.lambda);
    a.delta = file.get_double("delta", a.delta);
    a.feature_bound = file.get_double("feature_bound", a.feature_bound);
    a.margin = file.get_double("margin", a.margin);
    a.steps = static_cast<int>(file.get_int("steps", a.steps));
    const std::uint64_t seed = c.seed.value_or(static_cast<std::uint64_t>(file.get_int("seed", 0)));
    ClassParams b1 = file.get_matrix("betas1");
    ClassParams b2 = file.get_matrix("betas2");
    if (b1.rows() != b2.rows() || b1.cols() != b2.cols()) throw DimensionError("betas1 and betas2 differ in shape");

    std::cout << "config seed=" << seed << " n1=" << a.n1 << " n2=" << a.n2 << " C=" << b1.rows()
              << " p=" << b1.cols() << " lambda=" << a.lambda << " delta=" << a.delta << " B=" << a.feature_bound
              << " margin=" << a.margin << " steps=" << a.steps << " train=" << (a.train ? 1 : 0) << "\n";

    BoundSettings s;
    s.num_classes = static_cast<int>(b1.rows());
    s.feature_bound = a.feature_bound;
    s.lambda = a.lambda;
    s.delta = a.delta;
    s.steps = step_sums(a.steps);

    if (a.train) {
        // Plug-in mode: replace the true parameters by trained ones.
        auto fit = [&](const ClassParams& b, double n, const char* label) {
            ClassSpec spec{b, a.margin, a.feature_bound};
            const auto d = sample_separable(spec, static_cast<Eigen::Index>(n), derive_seed(seed, label));
            return subgradient_train(d, spec, a.lambda, a.margin, a.steps).best.beta_hats;
        };
        b1 = fit(b1, a.n1, "class_data_1");
        b2 = fit(b2, a.n2, "class_data_2");
    }
    const auto phi1 = phi_bound(a.n1, b1, s);
    const auto phi2 = phi_bound(a.n2, b2, s);
    const auto psi = psi_bound(a.n1, a.n2, b1, b2, s);
    const auto dec = decide_merge_classification(a.n1, a.n2, b1, b2, s, a.train);

    auto f = open_out(out_file(c, "class_bounds.csv"));
    write_bound_csv_header(f);
    write_bound_csv_row(f, "phi1", a.n1, 0, s, phi1);
    write_bound_csv_row(f, "phi2", a.n2, 0, s, phi2);
    write_bound_csv_row(f, "psi", a.n1, a.n2, s, psi);
    auto g = open_out(out_file(c, "class_decision.csv"));
    write_decision_csv(g, a.n1, a.n2, s, dec);

    std::cout << "phi1 " << phi1.total << "\nphi2 " << phi2.total << "\npsi " << psi.total << "\n"
              << "lhs " << dec.lhs << "\nrhs " << dec.rhs << "\n"
              << "merge " << (dec.merge ? "true" : "false") << (dec.plug_in ? " (plug-in norms)" : "") << "\n";
    return dec.merge ? kExitMerge : kExitSeparate;
}

struct SynthArgs {
    int n = 200;
    int p = 5;
    double beta_shift = 0.0;
    bool mu_shift = false;
    double noise_var = 1.0;
    std::string name = "synth";
};

int run_synth(const Common& c, const SynthArgs& a) {
    const auto file = load_config(c);
    const std::uint64_t seed = c.seed.value_or(static_cast<std::uint64_t>(file.get_int("seed", 0)));
    GaussianSpec spec;
    if (file.has("sigma_x")) {
        spec = load_gaussian_spec(file);
    } else {
        spec = GaussianSpec::isotropic(a.mu_shift ? Vector::Ones(a.p) : Vector::Zero(a.p),
                                       Vector::Constant(a.p, a.beta_shift), a.noise_var);
    }
    const int n = static_cast<int>(file.get_int("n", a.n));
    std::cout << "config seed=" << seed << " n=" << n << " p=" << spec.beta.size()
              << " noise_var=" << spec.noise_var << " name=" << a.name << "\n";
    const auto d = sample_synthetic(spec, n, derive_seed(seed, "synth"), a.name);
    const auto path = out_file(c, a.name + ".csv");
    write_csv(d, path.string(), c.target);
    std::cout << "wrote " << path.string() << "\n";
    return kExitMerge;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decide whether regression datasets should be merged, and cluster them."};
    app.require_subcommand(1);
    app.fallthrough();

    Common c;
    std::uint64_t seed_value = 0;
    app.add_option("--config", c.config_path, "flat key = value config file")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed_value, "root seed for all randomness");
    app.add_option("--threads", c.threads, "worker cap (0 = hardware)")->check(CLI::NonNegativeNumber);
    app.add_option("--target", c.target, "target column name");
    app.add_option("--mode", c.mode, "merge rule")->check(CLI::IsMember({"paper-literal", "majority-direction"}));
    app.add_flag("--desk", c.desk, "reduced-cost preset");
    app.add_option("--out", c.out_dir, "output directory");

    auto* pair = app.add_subcommand("decide-pair", "merge decision for two CSV files");
    std::string csv1, csv2;
    pair->add_option("csv1", csv1)->required()->check(CLI::ExistingFile);
    pair->add_option("csv2", csv2)->required()->check(CLI::ExistingFile);

    auto* cluster = app.add_subcommand("cluster", "greedy clustering of CSV files");
    std::vector<std::string> csvs;
    cluster->add_option("csvs", csvs)->required()->check(CLI::ExistingFile);

    auto* bench = app.add_subcommand("bench", "synthetic accuracy grid");
    bool mu_shift = false;
    bench->add_flag("--mu-shift", mu_shift, "mu_2 = 1_p");

    auto* cls = app.add_subcommand("class-bound", "classification bounds and merge rule (betas1/betas2 in config)");
    ClassBoundArgs cb;
    cls->add_option("--n1", cb.n1);
    cls->add_option("--n2", cb.n2);
    cls->add_option("--lambda", cb.lambda);
    cls->add_option("--delta", cb.delta);
    cls->add_option("--steps", cb.steps);
    cls->add_option("--feature-bound", cb.feature_bound);
    cls->add_option("--margin", cb.margin);
    cls->add_flag("--train", cb.train, "train on sampled data and plug in the fitted parameters");

    auto* synth = app.add_subcommand("synth", "write a synthetic Gaussian dataset as CSV");
    SynthArgs sa;
    synth->add_option("--n", sa.n);
    synth->add_option("--p", sa.p);
    synth->add_option("--beta-shift", sa.beta_shift, "beta = shift * 1_p");
    synth->add_flag("--mu-shift", sa.mu_shift, "mu = 1_p");
    synth->add_option("--noise-var", sa.noise_var);
    synth->add_option("--name", sa.name, "dataset id and file stem");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitError;
    }
    if (seed_opt->count() > 0) c.seed = seed_value;

    try {
        set_max_threads(static_cast<unsigned>(c.threads));
        if (pair->parsed()) return run_decide_pair(c, csv1, csv2);
        if (cluster->parsed()) return run_cluster(c, csvs);
        if (bench->parsed()) return run_bench(c, mu_shift);
        if (cls->parsed()) return run_class_bound(c, cb);
        if (synth->parsed()) return run_synth(c, sa);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
