// awp: data generation, base training, weight-perturbation attacks, sweeps,
// evaluation and checkpoint diffs.
//
// Exit codes: 0 success, 2 usage or validation, 3 numeric failure.
//
// Any command accepts --config FILE holding flat "key=value" lines (keys are
// long option names without dashes, '#' starts a comment). Flags given on the
// command line override the file, which overrides built-in defaults.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <set>

#include "awp/error.hpp"
#include "awp/kernels.hpp"
#include "awp/report.hpp"
#include "commands.hpp"

namespace fs = std::filesystem;
using namespace awp::cli;

namespace {

struct ConfigArgs {
    std::string path;
    std::vector<std::string> args;  // "--key", "value" pairs
    std::set<std::string> keys;
};

ConfigArgs read_config(const std::string& path) {
    ConfigArgs c;
    c.path = path;
    std::ifstream in(path);
    if (!in) throw awp::IoError("config file not found: " + path);
    std::string line;
    for (size_t no = 1; std::getline(in, line); ++no) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw awp::ParseError(path + ":" + std::to_string(no) + ": expected key=value");
        auto trim = [](std::string s) {
            const auto l = s.find_first_not_of(" \t\r\"");
            const auto r = s.find_last_not_of(" \t\r\"");
            return l == std::string::npos ? std::string() : s.substr(l, r - l + 1);
        };
        std::string key = trim(line.substr(0, eq));
        while (!key.empty() && key.front() == '-') key.erase(0, 1);
        c.keys.insert(key);
        c.args.push_back("--" + key);
        c.args.push_back(trim(line.substr(eq + 1)));
    }
    return c;
}

/// Pulls "--config X" / "--config=X" out of `args`.
std::string extract_config(std::vector<std::string>& args) {
    std::string path;
    for (size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
            --i;
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
            --i;
        }
    }
    return path;
}

std::set<std::string> flag_keys(const std::vector<std::string>& args) {
    std::set<std::string> keys;
    for (const auto& a : args) {
        if (a.rfind("--", 0) == 0 && a.size() > 2) keys.insert(a.substr(2, a.find('=') - 2));
    }
    return keys;
}

void describe_options(const CLI::App& sub, const std::set<std::string>& from_flags, const std::set<std::string>& from_file,
                      RunManifest& m) {
    for (const CLI::Option* opt : sub.get_options()) {
        const std::string name = opt->get_single_name();
        if (name.empty() || name == "help" || opt->get_lnames().empty()) continue;
        std::string value;
        if (opt->count() > 0) {
            for (const auto& r : opt->reduced_results()) value += (value.empty() ? "" : ",") + r;
        } else {
            value = opt->get_default_str();
        }
        if (!m.config.count(name)) m.config[name] = value;
        m.sources[name] = from_flags.count(name) ? "flag" : from_file.count(name) ? "file" : "default";
    }
}

void attack_flags(CLI::App* s, AttackOptions& o, bool sweep, bool eval) {
    s->add_option("--base", o.base, "Base checkpoint (AWPB)")->required();
    if (eval) s->add_option("--attacked", o.attacked, "Attacked checkpoint; defaults to the base");
    s->add_option("--train", o.train, "Training set (.awpd or .csv)");
    s->add_option("--test", o.test, "Test set (.awpd or .csv)")->required();
    s->add_option("--vocab", o.vocab, "Vocabulary file for text models; default: vocab.txt beside --base");
    s->add_option("--epsilon", o.epsilon, "l-inf radius on raw weights, or inf");
    s->add_option("--lambda", o.lambda, "Weight of the clean-prediction term");
    s->add_option("--eta", o.eta, "Step size");
    s->add_option("--iters", o.iters, "Passes over the poisoned set");
    s->add_option("--batch", o.batch, "Minibatch size; 0 for one full-batch step per pass");
    s->add_option("--target-mode", o.target_mode, "soft | hard");
    s->add_option("--target-label", o.target_label, "Backdoor target class y_T");
    s->add_option("--trigger-size", o.trigger_size, "Image trigger patch side");
    s->add_option("--trigger-fill", o.trigger_fill, "Image trigger fill value");
    s->add_option("--trigger-token", o.trigger_token, "Text trigger token");
    s->add_option("--seed", o.seed, "Batch-order seed");
    s->add_option("--threads", o.threads, "Evaluation threads");
    if (sweep) {
        s->add_option("--epsilons", o.epsilons, "Comma-separated epsilon grid (inf allowed)");
        s->add_option("--lambdas", o.lambdas, "Comma-separated lambda grid");
        s->add_option("--jobs", o.jobs, "Grid points run concurrently");
    }
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const awp::AttackError*>(&e) || dynamic_cast<const awp::TrainingError*>(&e)) return kNumeric;
    return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Backdoor injection by bounded weight perturbation"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    std::string out, tag;
    bool scalar = false;
    auto common = [&](CLI::App* s) {
        s->add_option("--out", out, "Output directory; default runs/<timestamp>-<tag>");
        s->add_option("--tag", tag, "Run directory suffix; default the command name");
        s->add_flag("--scalar", scalar, "Force the portable scalar kernels");
    };

    GenDataOptions gen;
    auto* s_gen = app.add_subcommand("gen-data", "Generate a synthetic image or text dataset");
    s_gen->add_option("--kind", gen.kind, "image | text");
    s_gen->add_option("--classes", gen.classes, "Number of classes; 0 for the kind's default (10 image, 2 text)");
    s_gen->add_option("--per-class", gen.per_class, "Training images per class");
    s_gen->add_option("--test-per-class", gen.test_per_class, "Test images per class");
    s_gen->add_option("--channels", gen.channels);
    s_gen->add_option("--height", gen.height);
    s_gen->add_option("--width", gen.width);
    s_gen->add_option("--margin", gen.margin, "Minimum RMS distance between class templates");
    s_gen->add_option("--noise", gen.noise, "Per-pixel Gaussian noise");
    s_gen->add_option("--grid", gen.grid, "Template pattern cells per side");
    s_gen->add_option("--train-size", gen.train_size, "Training sentences");
    s_gen->add_option("--test-size", gen.test_size, "Test sentences");
    s_gen->add_option("--seed", gen.seed);
    common(s_gen);

    TrainOptions tr;
    auto* s_train = app.add_subcommand("train-base", "Train the base model M");
    s_train->add_option("--train", tr.train, "Training set (.awpd or .csv)")->required();
    s_train->add_option("--val", tr.val, "Validation set; default a holdout split of --train");
    s_train->add_option("--holdout", tr.holdout, "Holdout fraction when --val is absent");
    s_train->add_option("--classes", tr.classes, "Classes of a text CSV");
    s_train->add_option("--vocab", tr.vocab, "Existing vocabulary; default built from --train plus the trigger token");
    s_train->add_option("--max-len", tr.max_len);
    s_train->add_option("--embed-dim", tr.embed_dim);
    s_train->add_option("--filters-per-width", tr.filters_per_width);
    s_train->add_option("--filter-widths", tr.filter_widths);
    s_train->add_option("--conv-filters", tr.conv_filters);
    s_train->add_option("--epochs", tr.epochs);
    s_train->add_option("--lr", tr.lr);
    s_train->add_option("--momentum", tr.momentum);
    s_train->add_option("--batch", tr.batch);
    s_train->add_option("--seed", tr.seed, "Initialization, split and batch-order seed");
    common(s_train);

    AttackOptions at, sw, ev;
    auto* s_attack = app.add_subcommand("attack", "Inject a backdoor into a base checkpoint");
    attack_flags(s_attack, at, false, false);
    s_attack->get_option("--train")->required();
    common(s_attack);
    auto* s_sweep = app.add_subcommand("sweep", "Run attack over an epsilon and/or lambda grid");
    attack_flags(s_sweep, sw, true, false);
    s_sweep->get_option("--train")->required();
    common(s_sweep);
    auto* s_eval = app.add_subcommand("eval", "Report accuracies and weight deltas of a checkpoint pair");
    attack_flags(s_eval, ev, false, true);
    common(s_eval);

    DiffOptions df;
    auto* s_diff = app.add_subcommand("weight-diff", "Per-tensor relative weight change between two checkpoints");
    s_diff->add_option("a", df.a, "Reference checkpoint")->required();
    s_diff->add_option("b", df.b, "Compared checkpoint")->required();
    s_diff->add_flag("--scalar", scalar);

    std::vector<std::string> user(argv + 1, argv + argc);
    ConfigArgs cfg;
    try {
        if (const std::string path = extract_config(user); !path.empty()) cfg = read_config(path);
        std::vector<std::string> args;
        if (!user.empty()) args.push_back(user.front());
        args.insert(args.end(), cfg.args.begin(), cfg.args.end());
        if (!user.empty()) args.insert(args.end(), user.begin() + 1, user.end());
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    if (scalar) awp::kernels::force_isa(awp::kernels::Isa::Scalar);

    CLI::App* sub = app.get_subcommands().front();
    if (sub == s_diff) {
        try {
            return cmd_weight_diff(df);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return exit_code_for(e);
        }
    }

    RunManifest m;
    m.command = sub->get_name();
    m.argv.assign(argv, argv + argc);
    m.config_file = cfg.path;
    m.started_at = awp::utc_timestamp();
    fs::path dir;
    int code = kOk;
    try {
        dir = make_run_dir(out, tag.empty() ? m.command : tag);
        if (sub == s_gen) code = cmd_gen_data(gen, dir, m);
        else if (sub == s_train) code = cmd_train_base(tr, dir, m);
        else if (sub == s_attack) code = cmd_attack(at, dir, m);
        else if (sub == s_sweep) code = cmd_sweep(sw, dir, m);
        else code = cmd_eval(ev, dir, m);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        m.failures.emplace_back(e.what());
        code = exit_code_for(e);
    }
    if (dir.empty()) return code;
    // A rejected invocation leaves nothing behind in an auto-named directory.
    if (code == kUsage && out.empty() && m.outputs.empty() && fs::is_empty(dir)) {
        fs::remove(dir);
        return code;
    }
    describe_options(*sub, flag_keys(user), cfg.keys, m);
    try {
        m.write(dir);
        std::cout << "run directory: " << dir.string() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    return code;
}
