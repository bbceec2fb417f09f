// jgn: synthesize corpora, train, evaluate and gradient-check the detector.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "jgn/checkpoint.hpp"
#include "jgn/dataset.hpp"
#include "jgn/gradcheck_suite.hpp"
#include "jgn/trainer.hpp"

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// key=value lines, '#' comments, blank lines ignored.
std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
        out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return out;
}

// Config values fill options the command line left unset.
void merge_config(CLI::App& sub, const std::string& path) {
    for (const auto& [key, value] : read_config(path)) {
        auto* opt = sub.get_option_no_throw("--" + key);
        if (opt == nullptr || key == "config")
            throw UsageError("config key '" + key + "' is not an option of '" + sub.get_name() + "'");
        if (opt->count() > 0) continue;
        opt->add_result(value);
        opt->run_callback();
    }
}

void echo_spec(const CLI::App& sub) {
    std::cerr << "[" << sub.get_name() << "]\n";
    for (const auto* opt : sub.get_options()) {
        if (opt->get_name() == "--help" || opt->get_lnames().empty()) continue;
        const auto& results = opt->results();
        std::string value = results.empty() ? opt->get_default_str() : CLI::detail::join(results, ",");
        std::cerr << opt->get_lnames().front() << "=" << value << "\n";
    }
}

jgn::Precision parse_precision(const std::string& s) {
    if (s == "standard") return jgn::Precision::standard;
    if (s == "wide") return jgn::Precision::wide;
    throw UsageError("precision must be standard or wide, got '" + s + "'");
}

std::pair<std::size_t, std::size_t> parse_epochs(const std::string& s) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw UsageError("--epochs expects E1,E2");
    try {
        std::size_t used = 0;
        const auto a = std::stoul(s.substr(0, comma), &used);
        const auto b = std::stoul(s.substr(comma + 1));
        return {a, b};
    } catch (const std::logic_error&) {
        throw UsageError("--epochs expects two non-negative integers, got '" + s + "'");
    }
}

jgn::Ablation ablation_of(const jgn::Checkpoint& ckpt) {
    bool sfe = false, gal = false;
    for (const auto& e : ckpt.entries) {
        sfe = sfe || e.name.rfind("sfe1.", 0) == 0;
        gal = gal || e.name.rfind("gal.", 0) == 0;
    }
    if (sfe && gal) return jgn::Ablation::full;
    if (sfe) return jgn::Ablation::no_gal;
    if (gal) return jgn::Ablation::no_sfe;
    return jgn::Ablation::neither;
}

struct TrainArgs {
    std::string data, val, init_from, out, log, epochs = "4,1", ablation = "full", precision = "standard";
    std::size_t batch_pairs = 16;
    double r1 = 1e-3, r2 = 1e-4, l2 = 2e-4, threshold = 3.0;
    std::uint64_t seed = 0;
    bool freeze_srm = false;
};

template <typename Real>
int run_train(const jgn::TrainConfig& cfg, const TrainArgs& args) {
    const auto train_set = jgn::load_dataset(args.data);
    const auto val_set = jgn::load_dataset(args.val);
    jgn::Network<Real> net(jgn::network_config(cfg, train_set.h, train_set.w));
    jgn::prepare_network(net, cfg);
    auto result = jgn::train(net, cfg, train_set, val_set, [](const jgn::EpochRecord& r) {
        std::fprintf(stderr, "epoch %zu phase %d loss %.4f train_acc %.4f val_acc %.4f val_pe %.4f\n", r.epoch,
                     r.phase, r.train_loss, r.train_acc, r.val_acc, r.val_pe);
    });
    std::fprintf(stderr, "initial val: P_E=%.4f ACC=%.4f\n", result.initial_val.p_e, result.initial_val.accuracy);
    std::fprintf(stderr, "best epoch %zu: P_E=%.4f ACC=%.4f\n", result.best_epoch, result.best_val.p_e,
                 result.best_val.accuracy);
    const auto csv = jgn::epoch_log_csv(result.log);
    jgn::save_checkpoint(jgn::snapshot(net.params()), args.out);
    jgn::write_file_atomic(args.log, std::vector<char>(csv.begin(), csv.end()));
    return 0;
}

template <typename Real>
int run_eval(const std::string& data, const std::string& ckpt_path, double threshold) {
    const auto ds = jgn::load_dataset(data);
    const auto ckpt = jgn::load_checkpoint(ckpt_path);
    jgn::NetworkConfig nc;
    nc.height = ds.h;
    nc.width = ds.w;
    nc.ablation = ablation_of(ckpt);
    nc.preprocess.threshold = threshold;
    jgn::Network<Real> net(nc);
    jgn::apply_checkpoint(ckpt, net.params());
    const auto r = jgn::evaluate(net, jgn::decompress_pairs(ds));
    std::printf("P_E=%.4f P_FA=%.4f P_MD=%.4f ACC=%.4f\n", r.p_e, r.p_fa, r.p_md, r.accuracy);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    jgn::tune_allocator();
    CLI::App app{"JPEG steganalysis with graph attention: synthesis, training, evaluation"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    std::string config_path;
    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value file; command-line flags win");
    };

    jgn::SynthOptions synth;
    std::string synth_out;
    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic cover/stego corpus (SGDS)");
    synth_cmd->add_option("--out", synth_out, "output file")->required();
    synth_cmd->add_option("--pairs", synth.pairs, "cover/stego pairs")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--rate", synth.rate, "payload in bpnzac")->check(CLI::Range(0.0, 1.0));
    synth_cmd->add_option("--qf", synth.qf, "JPEG quality factor")->check(CLI::Range(1, 100));
    synth_cmd->add_option("--size", synth.size, "image side, multiple of 8")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--seed", synth.seed, "seed");
    synth_cmd->add_option("--smoothing", synth.smoothing, "cover Gaussian sigma")->check(CLI::PositiveNumber);
    add_config(synth_cmd);

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "train a detector and write its best checkpoint");
    train_cmd->add_option("--data", ta.data, "training corpus")->required();
    train_cmd->add_option("--val", ta.val, "validation corpus")->required();
    train_cmd->add_option("--init-from", ta.init_from, "warm-start checkpoint");
    train_cmd->add_option("--ablation", ta.ablation, "full, no_sfe, no_gal or neither");
    train_cmd->add_option("--epochs", ta.epochs, "phase-1 and phase-2 epochs, E1,E2");
    train_cmd->add_option("--out", ta.out, "checkpoint to write")->required();
    train_cmd->add_option("--log", ta.log, "per-epoch CSV log")->required();
    train_cmd->add_option("--batch-pairs", ta.batch_pairs, "pairs per minibatch")->check(CLI::PositiveNumber);
    train_cmd->add_option("--r1", ta.r1, "phase-1 learning rate");
    train_cmd->add_option("--r2", ta.r2, "phase-2 learning rate");
    train_cmd->add_option("--l2", ta.l2, "L2 coefficient on weights");
    train_cmd->add_option("--seed", ta.seed, "seed for init and shuffling");
    train_cmd->add_option("--precision", ta.precision, "standard or wide");
    train_cmd->add_option("--threshold", ta.threshold, "TLU bound T")->check(CLI::PositiveNumber);
    train_cmd->add_flag("--freeze-srm", ta.freeze_srm, "keep the SRM kernels fixed");
    add_config(train_cmd);

    std::string eval_data, eval_ckpt, eval_precision = "standard";
    double eval_threshold = 3.0;
    auto* eval_cmd = app.add_subcommand("eval", "report P_E, P_FA, P_MD and accuracy of a checkpoint");
    eval_cmd->add_option("--data", eval_data, "corpus")->required();
    eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint")->required();
    eval_cmd->add_option("--precision", eval_precision, "standard or wide");
    eval_cmd->add_option("--threshold", eval_threshold, "TLU bound T used in training")->check(CLI::PositiveNumber);
    add_config(eval_cmd);

    std::string scope = "all", gc_ablation = "full";
    jgn::GradcheckOptions gc;
    double tolerance = 1e-3;
    auto* gc_cmd = app.add_subcommand("gradcheck", "wide-precision finite-difference checks");
    gc_cmd->add_option("--scope", scope, "all, tensor-core, preprocess, sfe, gal, backbone or model");
    gc_cmd->add_option("--ablation", gc_ablation, "architecture for the model scope");
    gc_cmd->add_option("--coords", gc.coords_per_group, "coordinates sampled per tensor")->check(CLI::PositiveNumber);
    gc_cmd->add_option("--step", gc.step, "finite-difference step")->check(CLI::PositiveNumber);
    gc_cmd->add_option("--seed", gc.seed, "seed");
    gc_cmd->add_option("--tolerance", tolerance, "fail above this relative error");
    add_config(gc_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    try {
        if (!config_path.empty()) merge_config(*sub, config_path);
        echo_spec(*sub);

        if (sub == synth_cmd) {
            if (synth.size % 8 != 0) throw UsageError("--size must be a multiple of 8");
            jgn::save_dataset(jgn::synthesize(synth), synth_out);
            std::fprintf(stderr, "wrote %zu pairs of %zux%zu to %s\n", synth.pairs, synth.size, synth.size,
                         synth_out.c_str());
            return 0;
        }
        if (sub == train_cmd) {
            jgn::TrainConfig cfg;
            std::tie(cfg.phase1_epochs, cfg.phase2_epochs) = parse_epochs(ta.epochs);
            cfg.batch_pairs = ta.batch_pairs;
            cfg.r1 = ta.r1;
            cfg.r2 = ta.r2;
            cfg.l2 = ta.l2;
            cfg.seed = ta.seed;
            cfg.precision = parse_precision(ta.precision);
            try {
                cfg.ablation = jgn::parse_ablation(ta.ablation);
                cfg.validate();
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            if (!ta.init_from.empty()) cfg.init_from = ta.init_from;
            cfg.preprocess.threshold = ta.threshold;
            cfg.preprocess.freeze_srm = ta.freeze_srm;
            return cfg.precision == jgn::Precision::wide ? run_train<double>(cfg, ta) : run_train<float>(cfg, ta);
        }
        if (sub == eval_cmd) {
            return parse_precision(eval_precision) == jgn::Precision::wide
                       ? run_eval<double>(eval_data, eval_ckpt, eval_threshold)
                       : run_eval<float>(eval_data, eval_ckpt, eval_threshold);
        }
        if (sub == gc_cmd) {
            try {
                gc.ablation = jgn::parse_ablation(gc_ablation);
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            const auto& scopes = jgn::gradcheck_scopes();
            if (scope != "all" && std::find(scopes.begin(), scopes.end(), scope) == scopes.end())
                throw UsageError("unknown scope '" + scope + "'");
            const auto groups = jgn::run_gradcheck(scope, gc);
            for (const auto& g : groups) std::printf("%-48s %.3e  (%zu coords)\n", g.group.c_str(), g.max_rel_error, g.coords);
            const double worst = jgn::max_error(groups);
            std::printf("max relative error %.3e over %zu groups\n", worst, groups.size());
            return worst < tolerance ? 0 : 1;
        }
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const jgn::FormatError& e) {
        std::fprintf(stderr, "format error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
