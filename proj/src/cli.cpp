#include "qnv/cli.hpp"

#include <cstdlib>
#include <algorithm>
#include <chrono>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "qnv/bench.hpp"
#include "qnv/enum_verifier.hpp"
#include "qnv/interval.hpp"
#include "qnv/report.hpp"
#include "qnv/table.hpp"
#include "qnv/trainer.hpp"

namespace qnv::cli {

namespace {

using Clock = std::chrono::steady_clock;

class Phases {
public:
    explicit Phases(RunReport& report) : report_(report), start_(Clock::now()) {}
    // Closes the running phase under `name` and starts the next one.
    void mark(const std::string& name) {
        const auto now = Clock::now();
        report_.timings.emplace_back(name, std::chrono::duration<double>(now - start_).count());
        start_ = now;
    }

private:
    RunReport& report_;
    Clock::time_point start_;
};

struct Common {
    std::string format = "text";
    unsigned jobs = 1;
    std::size_t chunk = 4096;
};

void add_format(CLI::App* app, Common& c) {
    app->add_option("--format", c.format, "Report format")->check(CLI::IsMember({"text", "json"}))->capture_default_str();
}

void add_parallel(CLI::App* app, Common& c) {
    app->add_option("--jobs", c.jobs, "Worker threads (affects wall time only)")
        ->envname("QNV_JOBS")
        ->check(CLI::Range(1u, 1024u))
        ->capture_default_str();
    app->add_option("--chunk", c.chunk, "Rows per batched forward call")->check(CLI::PositiveNumber)->capture_default_str();
}

EnumOptions enum_options(const Common& c, std::size_t max_cex = 1000) {
    EnumOptions o;
    o.jobs = c.jobs;
    o.chunk = c.chunk;
    o.max_counterexamples = max_cex;
    return o;
}

std::string vector_text(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += format_number(v[i]);
    }
    return s;
}

std::vector<Eigen::Index> parse_shape(const std::string& text) {
    std::vector<Eigen::Index> shape;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto v = parse_double(item);
        if (!v || *v < 1 || *v != std::floor(*v) || *v > 1e6) throw CLI::ValidationError("--shape", "bad width '" + item + "'");
        shape.push_back(static_cast<Eigen::Index>(*v));
    }
    return shape;
}

std::vector<Property> select_properties(const std::string& path, const QuantScheme& scheme, const std::string& name) {
    auto props = load_properties_file(path, scheme);
    if (name.empty()) return props;
    std::erase_if(props, [&](const Property& p) { return p.name != name; });
    if (props.empty()) throw std::invalid_argument("no property named '" + name + "' in " + path);
    return props;
}

int status_exit(VerdictStatus s) {
    switch (s) {
        case VerdictStatus::Holds:
            return kOk;
        case VerdictStatus::Violated:
            return kViolated;
        case VerdictStatus::Unknown:
            return kUnknown;
    }
    return kError;
}

// Worst outcome wins: violated over unknown over holds.
int combine_exit(int a, int b) {
    if (a == kViolated || b == kViolated) return kViolated;
    return std::max(a, b);
}

void emit(std::ostream& out, const Common& c, const RunReport& report, const std::string& text) {
    if (c.format == "json") {
        out << to_json(report).dump(2) << '\n';
    } else {
        out << text;
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Exact verification of input-quantized neural networks", "qnv"};
    app.require_subcommand(1);
    app.set_config("--config", "", "INI/TOML file; a [train] section supplies train options");
    app.set_version_flag("--version", std::string(kToolVersion));
    Common c;

    // scheme
    std::string scheme_out;
    auto* scheme_cmd = app.add_subcommand("scheme", "Write the built-in collision-avoidance quantization scheme");
    scheme_cmd->add_option("--out", scheme_out, "Output scheme file")->required();
    add_format(scheme_cmd, c);

    // gen-table
    std::string gt_scheme;
    std::string gt_out;
    double gt_tau = 5.0;
    std::string gt_alpha = "WR";
    auto* gen_cmd = app.add_subcommand("gen-table", "Generate the synthetic score table over a scheme");
    gen_cmd->add_option("--scheme", gt_scheme, "Quantization scheme file")->required()->check(CLI::ExistingFile);
    gen_cmd->add_option("--out", gt_out, "Output table file")->required();
    gen_cmd->add_option("--tau", gt_tau, "tau metadata (s)")->capture_default_str();
    gen_cmd->add_option("--alpha-prev", gt_alpha, "Previous advisory metadata")->capture_default_str();
    add_format(gen_cmd, c);

    // train
    std::string tr_table;
    std::string tr_out;
    std::string tr_name = "net";
    std::string tr_shape = "5,50,50,50,50,50,5";
    std::string tr_precision = "single";
    TrainConfig cfg;
    cfg.epochs = 2;
    auto* train_cmd = app.add_subcommand("train", "Fit a network to a score table by minibatch SGD");
    train_cmd->add_option("--table", tr_table, "Score table file")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--out", tr_out, "Output network file")->required();
    train_cmd->add_option("--name", tr_name, "Network name recorded in the file")->capture_default_str();
    train_cmd->add_option("--epochs", cfg.epochs)->capture_default_str();
    train_cmd->add_option("--batch-size", cfg.batch_size)->check(CLI::PositiveNumber)->capture_default_str();
    train_cmd->add_option("--learning-rate", cfg.learning_rate)->check(CLI::PositiveNumber)->capture_default_str();
    train_cmd->add_option("--asym-weight", cfg.asym_weight, "Loss multiplier on advisory mismatches")
        ->check(CLI::Range(1.0, 1e9))
        ->capture_default_str();
    train_cmd->add_option("--seed", cfg.seed)->capture_default_str();
    train_cmd->add_option("--shape", tr_shape, "Comma-separated layer widths")->capture_default_str();
    train_cmd->add_option("--precision", tr_precision)->check(CLI::IsMember({"single", "double"}))->capture_default_str();
    add_format(train_cmd, c);
    add_parallel(train_cmd, c);

    // metrics
    std::string m_net;
    std::string m_table;
    auto* metrics_cmd = app.add_subcommand("metrics", "Policy accuracy and score errors of a network on a table");
    metrics_cmd->add_option("--net", m_net)->required()->check(CLI::ExistingFile);
    metrics_cmd->add_option("--table", m_table)->required()->check(CLI::ExistingFile);
    add_format(metrics_cmd, c);
    add_parallel(metrics_cmd, c);

    // verify / verify-all / bench-compare share their inputs
    std::string v_net;
    std::string v_scheme;
    std::string v_prop;
    std::string v_name;
    std::string v_method = "enum";
    std::size_t v_max_cex = 1000;
    std::uint64_t v_max_boxes = 100000;
    auto add_verify_inputs = [&](CLI::App* cmd) {
        cmd->add_option("--net", v_net, "Network file")->required()->check(CLI::ExistingFile);
        cmd->add_option("--scheme", v_scheme, "Quantization scheme file")->required()->check(CLI::ExistingFile);
        cmd->add_option("--prop", v_prop, "Property file")->required()->check(CLI::ExistingFile);
        add_format(cmd, c);
        add_parallel(cmd, c);
    };
    auto* verify_cmd = app.add_subcommand("verify", "Verify one property");
    add_verify_inputs(verify_cmd);
    verify_cmd->add_option("--property", v_name, "Property name when the file holds several");
    verify_cmd->add_option("--method", v_method, "enum (exact) or interval (baseline)")
        ->check(CLI::IsMember({"enum", "interval"}))
        ->capture_default_str();
    verify_cmd->add_option("--max-counterexamples", v_max_cex)->capture_default_str();
    verify_cmd->add_option("--max-boxes", v_max_boxes, "Interval baseline budget")->capture_default_str();
    auto* verify_all_cmd = app.add_subcommand("verify-all", "Verify every property in a file with one grid pass");
    add_verify_inputs(verify_all_cmd);
    verify_all_cmd->add_option("--max-counterexamples", v_max_cex)->capture_default_str();
    auto* compare_cmd = app.add_subcommand("bench-compare", "Time exact enumeration against the interval baseline");
    add_verify_inputs(compare_cmd);
    compare_cmd->add_option("--property", v_name, "Only this property");
    compare_cmd->add_option("--max-boxes", v_max_boxes, "Interval baseline budget")->capture_default_str();

    // grid-eval
    std::string g_net;
    std::string g_scheme;
    std::string g_out;
    auto* grid_cmd = app.add_subcommand("grid-eval", "Evaluate the network on every grid point");
    grid_cmd->add_option("--net", g_net)->required()->check(CLI::ExistingFile);
    grid_cmd->add_option("--scheme", g_scheme)->required()->check(CLI::ExistingFile);
    grid_cmd->add_option("--out", g_out, "Optional CSV of scores, one row per flat index");
    add_format(grid_cmd, c);
    add_parallel(grid_cmd, c);

    // bench-overhead
    std::string b_net;
    std::string b_scheme;
    std::size_t b_points = 1'000'000;
    std::uint64_t b_seed = 0;
    unsigned b_repeats = 3;
    auto* overhead_cmd = app.add_subcommand("bench-overhead", "Throughput of quantize+forward against forward alone");
    overhead_cmd->add_option("--net", b_net)->required()->check(CLI::ExistingFile);
    overhead_cmd->add_option("--scheme", b_scheme)->required()->check(CLI::ExistingFile);
    overhead_cmd->add_option("--points", b_points)->check(CLI::PositiveNumber)->capture_default_str();
    overhead_cmd->add_option("--seed", b_seed)->capture_default_str();
    overhead_cmd->add_option("--repeats", b_repeats)->check(CLI::PositiveNumber)->capture_default_str();
    add_format(overhead_cmd, c);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, err, err);
        return kError;
    }

    const auto* sub = app.get_subcommands().front();
    for (const auto* opt : sub->get_options()) {
        // CLI11 drops an environment value that fails its check; treat it as an error instead.
        if (opt->count() == 0 && !opt->get_envname().empty()) {
            const char* env = std::getenv(opt->get_envname().c_str());
            if (env != nullptr && *env != '\0') {
                err << "error: " << opt->get_envname() << "=" << env << " is not a valid " << opt->get_name() << "\n";
                return kError;
            }
        }
    }

    RunReport report;
    report.command = sub->get_name();
    for (const auto* opt : sub->get_options()) {
        if (opt->count() > 0 && !opt->get_lnames().empty()) {
            report.inputs["--" + opt->get_lnames().front()] = opt->as<std::string>();
        }
    }
    Phases phases(report);
    std::ostringstream text;

    try {
        if (scheme_cmd->parsed()) {
            save_scheme_file(cas_scheme(), scheme_out);
            phases.mark("write");
            report.result = {{"path", scheme_out}, {"grid_size", cas_scheme().grid_size()}};
            text << "wrote " << scheme_out << " (" << cas_scheme().grid_size() << " grid points)\n";
        } else if (gen_cmd->parsed()) {
            const auto alpha = parse_action(gt_alpha);
            if (!alpha) throw std::invalid_argument("unknown action '" + gt_alpha + "'");
            const auto scheme = load_scheme_file(gt_scheme);
            phases.mark("load");
            const auto table = generate_synthetic_table(scheme, gt_tau, *alpha);
            phases.mark("generate");
            save_table_file(table, gt_out);
            phases.mark("write");
            report.result = {{"path", gt_out}, {"rows", table.scores.rows()}};
            text << "wrote " << gt_out << " (" << table.scores.rows() << " rows)\n";
        } else if (train_cmd->parsed()) {
            cfg.shape = parse_shape(tr_shape);
            cfg.precision = *parse_precision(tr_precision);
            const auto table = load_table_file(tr_table);
            phases.mark("load");
            TrainReport tr;
            const Network trained = train(table, cfg, &tr);
            phases.mark("train");
            NetworkMetadata meta = trained.metadata();
            meta.name = tr_name;
            const Network net(trained.layers(), trained.precision(), trained.normalization(), meta);
            const double acc = policy_accuracy(full_grid_eval(net, table.scheme, enum_options(c)), table);
            phases.mark("evaluate");
            save_network_file(net, tr_out);
            phases.mark("write");
            report.result = {{"path", tr_out},         {"initial_loss", tr.initial_loss},
                             {"final_loss", tr.final_loss}, {"epoch_loss", tr.epoch_loss},
                             {"policy_accuracy", acc}};
            text << "initial_loss " << format_number(tr.initial_loss) << '\n'
                 << "final_loss " << format_number(tr.final_loss) << '\n'
                 << "epoch_loss " << vector_text(tr.epoch_loss) << '\n'
                 << "policy_accuracy " << format_number(acc) << '\n'
                 << "wrote " << tr_out << '\n';
        } else if (metrics_cmd->parsed()) {
            const auto net = load_network_file(m_net);
            const auto table = load_table_file(m_table);
            phases.mark("load");
            const auto pred = full_grid_eval(net, table.scheme, enum_options(c));
            phases.mark("evaluate");
            const double acc = policy_accuracy(pred, table);
            const double l1 = score_error(pred, table, ScoreNorm::L1);
            const double l2 = score_error(pred, table, ScoreNorm::L2);
            phases.mark("metrics");
            report.result = {{"rows", pred.rows()}, {"policy_accuracy", acc}, {"l1_error", l1}, {"l2_error", l2}};
            text << "rows " << pred.rows() << '\n'
                 << "policy_accuracy " << format_number(acc) << '\n'
                 << "l1_error " << format_number(l1) << '\n'
                 << "l2_error " << format_number(l2) << '\n';
        } else if (verify_cmd->parsed()) {
            const auto net = load_network_file(v_net);
            const auto scheme = load_scheme_file(v_scheme);
            const auto props = select_properties(v_prop, scheme, v_name);
            if (props.size() != 1) {
                throw std::invalid_argument(v_prop + " holds " + std::to_string(props.size()) +
                                            " properties; pick one with --property or use verify-all");
            }
            phases.mark("load");
            if (v_method == "enum") {
                const auto verdict = verify(net, scheme, props.front(), enum_options(c, v_max_cex));
                phases.mark("verify");
                report.result = to_json(verdict);
                report.exit_status = status_exit(verdict.status);
                text << to_text(verdict);
            } else {
                BisectOptions bo;
                bo.max_boxes = v_max_boxes;
                const auto verdict = bisect_verify(net, props.front(), bo);
                phases.mark("verify");
                report.result = to_json(verdict);
                report.exit_status = status_exit(verdict.status);
                text << to_text(verdict);
            }
        } else if (verify_all_cmd->parsed()) {
            const auto net = load_network_file(v_net);
            const auto scheme = load_scheme_file(v_scheme);
            const auto props = load_properties_file(v_prop, scheme);
            phases.mark("load");
            EvalCounter counter;
            auto opts = enum_options(c, v_max_cex);
            opts.counter = &counter;
            const auto verdicts = verify_all(net, scheme, props, opts);
            phases.mark("verify");
            auto arr = nlohmann::json::array();
            for (const auto& p : props) {
                const auto& v = verdicts.at(p.name);
                arr.push_back(to_json(v));
                report.exit_status = combine_exit(report.exit_status, status_exit(v.status));
                text << to_text(v);
            }
            report.result = {{"grid_passes", counter.grid_passes.load()}, {"verdicts", std::move(arr)}};
            text << "grid_passes " << counter.grid_passes.load() << '\n';
        } else if (compare_cmd->parsed()) {
            const auto net = load_network_file(v_net);
            const auto scheme = load_scheme_file(v_scheme);
            const auto props = select_properties(v_prop, scheme, v_name);
            phases.mark("load");
            BisectOptions bo;
            bo.max_boxes = v_max_boxes;
            auto rows = nlohmann::json::array();
            text << "property  enum_status  enum_s  states  interval_status  interval_s  boxes\n";
            for (const auto& p : props) {
                const auto ev = verify(net, scheme, p, enum_options(c));
                const auto iv = bisect_verify(net, p, bo);
                rows.push_back({{"enum", to_json(ev)}, {"interval", to_json(iv)}});
                report.exit_status = combine_exit(report.exit_status, status_exit(ev.status));
                text << p.name << "  " << status_name(ev.status) << "  " << format_number(ev.wall_time) << "  "
                     << ev.states_checked << "  " << status_name(iv.status) << "  " << format_number(iv.wall_time)
                     << "  " << iv.boxes_explored << '\n';
            }
            phases.mark("compare");
            report.result = {{"rows", std::move(rows)}};
        } else if (grid_cmd->parsed()) {
            const auto net = load_network_file(g_net);
            const auto scheme = load_scheme_file(g_scheme);
            phases.mark("load");
            std::ofstream csv;
            if (!g_out.empty()) {
                csv.open(g_out);
                if (!csv) throw std::runtime_error("cannot write " + g_out);
            }
            const bool single = net.precision() == Precision::Single;
            std::uint64_t rows = 0;
            std::string line;
            const auto t0 = Clock::now();
            full_grid_stream(net, scheme, enum_options(c), [&](std::uint64_t, const RowMatrixXd&, const RowMatrixXd& s) {
                rows += static_cast<std::uint64_t>(s.rows());
                if (!csv.is_open()) return;
                for (Eigen::Index r = 0; r < s.rows(); ++r) {
                    line.clear();
                    for (Eigen::Index k = 0; k < s.cols(); ++k) {
                        if (k) line += ',';
                        line += single ? format_number(static_cast<float>(s(r, k))) : format_number(s(r, k));
                    }
                    line += '\n';
                    csv << line;
                }
            });
            const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
            phases.mark("evaluate");
            if (csv.is_open() && !csv.flush()) throw std::runtime_error("error writing " + g_out);
            report.result = {{"rows", rows}, {"seconds", secs}, {"rows_per_s", static_cast<double>(rows) / secs}};
            text << "rows " << rows << '\n' << "seconds " << format_number(secs) << '\n';
            if (csv.is_open()) text << "wrote " << g_out << '\n';
        } else if (overhead_cmd->parsed()) {
            const auto net = load_network_file(b_net);
            const auto scheme = load_scheme_file(b_scheme);
            phases.mark("load");
            const auto r = bench_overhead(net, scheme, b_points, b_seed, b_repeats);
            phases.mark("bench");
            const double n = static_cast<double>(r.points);
            report.result = {{"points", r.points},
                             {"repeats", r.repeats},
                             {"forward_s", r.forward_s},
                             {"quantized_s", r.quantized_s},
                             {"forward_points_per_s", n / r.forward_s},
                             {"quantized_points_per_s", n / r.quantized_s},
                             {"overhead", r.overhead()}};
            text << "points " << r.points << '\n'
                 << "forward_s " << format_number(r.forward_s) << '\n'
                 << "quantized_s " << format_number(r.quantized_s) << '\n'
                 << "overhead_pct " << format_number(100.0 * r.overhead()) << '\n';
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kError;
    }
    emit(out, c, report, text.str());
    return report.exit_status;
}

}  // namespace qnv::cli
