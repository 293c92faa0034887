// dgcrf: command-line front end for the dense low-rank G-CRF layer.
//
//   dgcrf solve      --embeddings E.txt --unary B.txt [--lambda 1] [--oracle]
//   dgcrf grad-check [--config cfg.json] [--sabotage]
//   dgcrf train      --config cfg.json [--gnuplot]
//   dgcrf eval       --config cfg.json --model DIR
//   dgcrf bench      --n 1024,4096 --d 8,16 [--repeats 5] [--gnuplot]
//
// Exit codes: 0 ok, 1 usage/I-O/shape, 2 CG non-convergence, 3 failed check, 4 divergence.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dgcrf/dgcrf.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNotConverged = 2;
constexpr int kExitCheckFailed = 3;
constexpr int kExitDiverged = 4;

std::string fmt(double v)
{
    std::string s;
    dgcrf::detail::append_shortest(s, v);
    return s;
}

void print_report(std::ostream& out, const dgcrf::CgReport& r)
{
    out << "iterations=" << r.iterations << "\n"
        << "final_residual_norm=" << fmt(r.final_residual_norm) << "\n"
        << "threshold=" << fmt(r.threshold) << "\n"
        << "converged=" << (r.converged ? "true" : "false") << "\n";
}

struct SolveArgs {
    std::string embeddings, unary, out;
    double lambda = 1.0;
    std::size_t labels = 1;
    bool oracle = false;
    dgcrf::CgConfig cg;
};

int cmd_solve(const SolveArgs& a)
{
    using namespace dgcrf;
    const Matrix emb = read_matrix(a.embeddings);
    const Vector b = read_vector(a.unary);
    if (emb.cols() != b.size())
        throw ShapeError("embeddings have " + std::to_string(emb.cols()) + " columns but unary has length " +
                         std::to_string(b.size()));
    if (a.labels == 0 || b.size() % a.labels != 0)
        throw ShapeError("unary length " + std::to_string(b.size()) + " is not a multiple of --labels");
    GcrfLayer layer(Dims(b.size() / a.labels, a.labels, emb.rows()), emb, a.lambda, a.cg);
    const auto [x, report] = forward(layer, b);

    std::cout << "x:";
    for (double v : x) std::cout << ' ' << fmt(v);
    std::cout << "\n";
    print_report(std::cout, report);
    if (!a.out.empty()) write_vector(a.out, x);

    if (a.oracle) {
        const Vector direct = reference::direct_solve({reference::assemble_dense(layer), b});
        const double denom = norm2(direct);
        const double disc = denom > 0.0 ? norm2(x - direct) / denom : norm2(x);
        std::cout << "oracle_rel_discrepancy=" << fmt(disc) << "\n";
    }
    return report.converged ? kExitOk : kExitNotConverged;
}

int cmd_grad_check(const std::string& config, bool sabotage, const std::string& csv_path)
{
    using namespace dgcrf;
    const RunConfig cfg = config.empty() ? parse_run_config(nlohmann::json::object(), RunKind::grad_check)
                                         : load_run_config(config, RunKind::grad_check);
    std::cout << "# config: " << to_json(cfg).dump() << "\n";
    const auto rows = run_grad_check(cfg.grad_check_spec(sabotage));
    write_check_csv(std::cout, rows);
    if (!csv_path.empty()) {
        std::ofstream out(csv_path);
        write_check_csv(out, rows);
    }
    bool all = true;
    for (const auto& r : rows) all = all && r.pass;
    std::cout << (all ? "# all checks passed" : "# CHECK FAILED") << "\n";
    return all ? kExitOk : kExitCheckFailed;
}

void emit_train_gnuplot(std::ostream& out, const std::string& metrics_csv)
{
    out << "set datafile separator ','\n"
        << "set key autotitle columnhead\n"
        << "set xlabel 'iteration'\n"
        << "set multiplot layout 2,1\n"
        << "set ylabel 'loss'\n"
        << "plot '" << metrics_csv << "' using 1:4 with lines title 'loss'\n"
        << "set ylabel 'pixel accuracy'\n"
        << "plot '" << metrics_csv << "' using 1:5 with lines title 'accuracy'\n"
        << "unset multiplot\n";
}

void print_eval(std::ostream& out, const dgcrf::EvalReport& rep)
{
    out << "unary_acc,dense_acc,delta\n" << fmt(rep.unary_acc) << "," << fmt(rep.dense_acc) << "," << fmt(rep.delta())
        << "\n";
}

int cmd_train(const std::string& config, bool gnuplot)
{
    using namespace dgcrf;
    const RunConfig cfg = load_run_config(config, RunKind::train);
    std::ostream& log = gnuplot ? std::cerr : std::cout;
    log << "# config: " << to_json(cfg).dump() << "\n";

    const auto data = generate(cfg.task);
    const std::filesystem::path model_dir = cfg.paths.model_dir;
    std::filesystem::create_directories(model_dir);

    const bool fresh = !std::filesystem::exists(cfg.paths.metrics_csv) ||
                       std::filesystem::file_size(cfg.paths.metrics_csv) == 0;
    std::ofstream metrics(cfg.paths.metrics_csv, std::ios::app);
    if (!metrics) throw FormatError("cannot open metrics file '" + cfg.paths.metrics_csv + "'");
    if (fresh) write_history_header(metrics);

    auto on_phase = [&](int phase, const ToyModel& m) {
        save_model(model_dir / ("phase" + std::to_string(phase)), m);
        log << "# phase " << phase << " checkpoint written\n";
    };
    auto on_row = [&](const HistoryRow& row) { write_history_row(metrics, row); };
    const auto result =
        train_two_phase(data.train, cfg.dims, cfg.task.feature_dim(), cfg.train, cfg.cg, on_phase, on_row);
    save_model(model_dir, result.model);
    metrics.flush();

    print_eval(log, evaluate(result.model, data.test, cfg.lambda, cfg.cg));
    if (gnuplot) emit_train_gnuplot(std::cout, cfg.paths.metrics_csv);
    return kExitOk;
}

int cmd_eval(const std::string& config, const std::string& model_dir)
{
    using namespace dgcrf;
    const RunConfig cfg = load_run_config(config, RunKind::train);
    std::cout << "# config: " << to_json(cfg).dump() << "\n";
    const ToyModel model = load_model(model_dir);
    if (model.dims.pixels != cfg.dims.pixels || model.dims.labels != cfg.dims.labels ||
        model.feature_dim != cfg.task.feature_dim())
        throw ShapeError("model in '" + model_dir + "' does not match the configured task");
    const auto data = generate(cfg.task);
    print_eval(std::cout, evaluate(model, data.test, cfg.lambda, cfg.cg));
    return kExitOk;
}

void emit_bench_gnuplot(std::ostream& out, const std::vector<dgcrf::BenchRow>& rows)
{
    out << "$bench << EOD\n";
    dgcrf::write_bench_csv(out, rows);
    out << "EOD\n"
        << "set datafile separator ','\n"
        << "set xlabel 'D'\nset ylabel 'apply time [ns]'\nset logscale xy\n"
        << "plot $bench using 2:3:1 every ::1 with points palette title 'operator apply'\n";
}

int cmd_bench(const std::vector<std::size_t>& ns, const std::vector<std::size_t>& ds, std::size_t repeats,
              std::uint64_t seed, bool gnuplot)
{
    using namespace dgcrf;
    if (repeats == 0) throw ConfigError("--repeats must be positive");
    std::cerr << "# threads=1\n";
    const auto rows = run_bench(ns, ds, repeats, seed);
    if (gnuplot)
        emit_bench_gnuplot(std::cout, rows);
    else
        write_bench_csv(std::cout, rows);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Dense low-rank Gaussian CRF: inference, gradient checks, toy training and benchmarks"};
    app.require_subcommand(1);

    SolveArgs solve;
    auto* solve_cmd = app.add_subcommand("solve", "Solve (E'E + lambda I) x = B with conjugate gradients");
    solve_cmd->add_option("--embeddings", solve.embeddings, "D x N embedding matrix file")->required();
    solve_cmd->add_option("--unary", solve.unary, "Unary vector file (1 x N or N x 1)")->required();
    solve_cmd->add_option("--lambda", solve.lambda, "Diagonal regularizer")->capture_default_str();
    solve_cmd->add_option("--labels", solve.labels, "Labels per pixel (N must be a multiple)")->capture_default_str();
    solve_cmd->add_flag("--oracle", solve.oracle, "Also solve densely and report the relative discrepancy");
    solve_cmd->add_option("--rel-tol", solve.cg.rel_tol, "CG relative tolerance")->capture_default_str();
    solve_cmd->add_option("--abs-tol", solve.cg.abs_tol, "CG absolute tolerance")->capture_default_str();
    solve_cmd->add_option("--max-iters", solve.cg.max_iters, "CG iteration cap (0 = 10 N)")->capture_default_str();
    solve_cmd->add_option("--out", solve.out, "Write x to this matrix file");

    std::string gc_config, gc_csv;
    bool sabotage = false;
    auto* gc_cmd = app.add_subcommand("grad-check", "Run the randomized gradient oracle suite");
    gc_cmd->add_option("--config", gc_config, "JSON run config");
    gc_cmd->add_flag("--sabotage", sabotage, "Use a deliberately wrong embedding gradient (negative control)");
    gc_cmd->add_option("--csv", gc_csv, "Also write the check table to this CSV file");

    std::string train_config;
    bool train_gnuplot = false;
    auto* train_cmd = app.add_subcommand("train", "Two-phase training on the synthetic task");
    train_cmd->add_option("--config", train_config, "JSON run config")->required();
    train_cmd->add_flag("--gnuplot", train_gnuplot, "Print a gnuplot script for the metrics on stdout");

    std::string eval_config, eval_model;
    auto* eval_cmd = app.add_subcommand("eval", "Unary-only vs dense accuracy on the synthetic test split");
    eval_cmd->add_option("--config", eval_config, "JSON run config")->required();
    eval_cmd->add_option("--model", eval_model, "Checkpoint directory")->required();

    std::vector<std::size_t> bench_n{1024, 4096}, bench_d{4, 8, 16, 32};
    std::size_t repeats = 5;
    std::uint64_t bench_seed = 0;
    bool bench_gnuplot = false;
    auto* bench_cmd = app.add_subcommand("bench", "Time operator application and forward solves");
    bench_cmd->add_option("--n", bench_n, "Comma-separated N values")->delimiter(',')->capture_default_str();
    bench_cmd->add_option("--d", bench_d, "Comma-separated D values")->delimiter(',')->capture_default_str();
    bench_cmd->add_option("--repeats", repeats, "Timing repeats per cell")->capture_default_str();
    bench_cmd->add_option("--seed", bench_seed, "Instance seed")->capture_default_str();
    bench_cmd->add_flag("--gnuplot", bench_gnuplot, "Print a gnuplot script with inline data instead of CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*solve_cmd) return cmd_solve(solve);
        if (*gc_cmd) return cmd_grad_check(gc_config, sabotage, gc_csv);
        if (*train_cmd) return cmd_train(train_config, train_gnuplot);
        if (*eval_cmd) return cmd_eval(eval_config, eval_model);
        if (*bench_cmd) return cmd_bench(bench_n, bench_d, repeats, bench_seed, bench_gnuplot);
    } catch (const dgcrf::DivergenceError& e) {
        std::cerr << "error: training diverged: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
