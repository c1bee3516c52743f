#include "commands.hpp"

#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "awp/attack.hpp"
#include "awp/error.hpp"
#include "awp/metrics.hpp"
#include "awp/report.hpp"
#include "awp/synthetic.hpp"
#include "awp/train.hpp"

namespace awp::cli {

namespace fs = std::filesystem;

namespace {

void require_file(const std::string& path, const char* what) {
    if (path.empty()) throw ValidationError(std::string("missing --") + what);
    if (!fs::is_regular_file(path)) throw IoError(std::string(what) + " file not found: " + path);
}

bool is_text_path(const fs::path& p) { return p.extension() == ".csv"; }

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) throw ValidationError("empty entry in list '" + s + "'");
        out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

std::vector<int64_t> int_list(const std::string& s) {
    std::vector<int64_t> out;
    for (const auto& item : split_list(s)) {
        try {
            size_t used = 0;
            out.push_back(std::stoll(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::logic_error&) {
            throw ValidationError("not an integer: '" + item + "'");
        }
    }
    return out;
}

double parse_double(const std::string& s) {
    try {
        size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::logic_error&) {
    }
    throw ValidationError("not a number: '" + s + "'");
}

/// Vocabulary for a text run: explicit path, else vocab.txt next to `anchor`.
VocabMap resolve_vocab(const std::string& explicit_path, const fs::path& anchor, RunManifest& m) {
    fs::path p = explicit_path.empty() ? anchor.parent_path() / "vocab.txt" : fs::path(explicit_path);
    if (!fs::is_regular_file(p)) throw IoError("vocabulary file not found: " + p.string());
    m.add_input(p);
    return VocabMap::load(p);
}

Dataset load_for_model(const std::string& path, const ModelSpec& spec, const VocabMap* vocab, RunManifest& m) {
    require_file(path, "dataset");
    m.add_input(path);
    Dataset d = is_text_path(path) ? load_text_csv(path, *vocab, spec.max_len, spec.num_classes) : load_dataset_bin(path);
    d.id = "sha256:" + m.inputs.at(path);
    check_compatible(spec, d);
    return d;
}

AttackConfig attack_config(const AttackOptions& o) {
    AttackConfig c;
    c.epsilon = parse_epsilon(o.epsilon);
    c.lambda = o.lambda;
    c.eta = o.eta;
    c.iterations = o.iters;
    c.batch_size = o.batch;
    c.target_mode = parse_target_mode(o.target_mode);
    c.seed = o.seed;
    c.validate();
    return c;
}

TriggerSpec trigger_for(const AttackOptions& o, const ModelSpec& spec, const VocabMap* vocab) {
    if (spec.kind == ModelKind::WordCnn) return TriggerSpec::token_prepend(*vocab, o.trigger_token, o.target_label);
    return TriggerSpec::image_patch(o.trigger_size, o.target_label, static_cast<float>(o.trigger_fill));
}

/// Inputs every attack-style command shares.
struct AttackInputs {
    Checkpoint base;
    VocabMap vocab;
    bool text = false;
    Dataset train;
    Dataset test;
    TriggerSpec trigger;
};

AttackInputs load_attack_inputs(const AttackOptions& o, RunManifest& m, bool need_train) {
    require_file(o.base, "base");
    AttackInputs in;
    m.add_input(o.base);
    in.base = load(o.base);
    in.text = in.base.spec.kind == ModelKind::WordCnn;
    if (in.text) in.vocab = resolve_vocab(o.vocab, o.base, m);
    const VocabMap* vp = in.text ? &in.vocab : nullptr;
    if (need_train) in.train = load_for_model(o.train, in.base.spec, vp, m);
    in.test = load_for_model(o.test, in.base.spec, vp, m);
    in.trigger = trigger_for(o, in.base.spec, vp);
    validate_trigger(in.trigger, in.test);
    return in;
}

struct PointOutcome {
    EvalReport report;
    std::string error;
    bool numeric = false;
};

PointOutcome attack_point(const AttackInputs& in, const AttackConfig& cfg, const fs::path& dir, int threads) {
    PointOutcome out;
    try {
        fs::create_directories(dir);
        AttackResult r = run_attack(in.base, in.train, in.trigger, cfg);
        for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
        save(r.perturbed, dir / "attacked.ckpt");
        write_trace_csv(r.trace, dir / "trace.csv");
        out.report = build_report(in.base, r.perturbed, in.test, in.trigger, cfg, threads);
        out.report.train_dataset = in.train.id;
        write_report_json(out.report, dir / "report.json");
    } catch (const AttackError& e) {
        out.error = e.what();
        out.numeric = true;
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

void record_outputs(const fs::path& dir, RunManifest& m) {
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().filename() != "manifest.json") m.add_output(e.path());
    }
}

std::string pct_or_na(std::span<const float> a, std::span<const float> b, Norm p) {
    try {
        std::ostringstream os;
        os << std::fixed << std::setprecision(4) << delta_lp(a, b, p);
        return os.str();
    } catch (const DivisionError&) {
        return "n/a";
    }
}

}  // namespace

int cmd_gen_data(const GenDataOptions& o, const fs::path& dir, RunManifest& m) {
    m.seeds["data"] = o.seed;
    if (o.kind == "image") {
        SyntheticImageConfig c;
        c.classes = o.classes == 0 ? 10 : o.classes;
        m.config["classes"] = std::to_string(c.classes);
        c.train_per_class = o.per_class;
        c.test_per_class = o.test_per_class;
        c.channels = o.channels;
        c.height = o.height;
        c.width = o.width;
        c.margin = o.margin;
        c.noise = o.noise;
        c.grid = o.grid;
        c.seed = o.seed;
        auto [train, test] = gen_synthetic_images(c);
        save_dataset_bin(train, dir / "train.awpd");
        save_dataset_bin(test, dir / "test.awpd");
        std::cout << "wrote " << train.size() << " train / " << test.size() << " test images to " << dir.string()
                  << " (separability threshold margin " << separability_threshold(c) << ")\n";
    } else if (o.kind == "text") {
        if (o.classes != 0 && o.classes != 2) {
            throw ValidationError("text generator produces 2 classes, got --classes " + std::to_string(o.classes));
        }
        m.config["classes"] = "2";
        SyntheticTextConfig c;
        c.train_size = o.train_size;
        c.test_size = o.test_size;
        c.seed = o.seed;
        const SyntheticText t = gen_synthetic_text(c);
        write_text_csv(dir / "train.csv", t.train);
        write_text_csv(dir / "test.csv", t.test);
        std::vector<std::string> texts;
        for (const auto& r : t.train) texts.push_back(r.text);
        const std::string extra[] = {"trigger"};
        VocabMap::build(texts, extra).save(dir / "vocab.txt");
        std::cout << "wrote " << t.train.size() << " train / " << t.test.size() << " test sentences to "
                  << dir.string() << '\n';
    } else {
        throw ValidationError("--kind must be image or text, got '" + o.kind + "'");
    }
    record_outputs(dir, m);
    return kOk;
}

int cmd_train_base(const TrainOptions& o, const fs::path& dir, RunManifest& m) {
    require_file(o.train, "train");
    m.add_input(o.train);
    m.seeds["model"] = o.seed;
    const bool text = is_text_path(o.train);

    VocabMap vocab;
    Dataset train, val;
    ModelSpec spec;
    if (text) {
        if (o.vocab.empty()) {
            const std::string extra[] = {"trigger"};
            train = load_text_csv(o.train, o.max_len, o.classes, vocab, extra);
        } else {
            require_file(o.vocab, "vocab");
            m.add_input(o.vocab);
            vocab = VocabMap::load(o.vocab);
            train = load_text_csv(o.train, vocab, o.max_len, o.classes);
        }
        spec = ModelSpec::word_cnn(o.classes, vocab.size(), o.embed_dim, o.max_len, int_list(o.filter_widths),
                                   o.filters_per_width, o.seed);
        vocab.save(dir / "vocab.txt");
    } else {
        train = load_dataset_bin(o.train);
        const auto& s = train.example_shape();
        if (train.kind() != DataKind::Image || s.size() != 3) throw ValidationError(o.train + " does not hold images");
        spec = ModelSpec::image_cnn(train.num_classes(), s[0], s[1], s[2], o.seed);
        spec.conv_filters = int_list(o.conv_filters);
    }
    spec.validate();
    train.id = "sha256:" + m.inputs.at(o.train);

    if (!o.val.empty()) {
        require_file(o.val, "val");
        m.add_input(o.val);
        val = text ? load_text_csv(o.val, vocab, o.max_len, o.classes) : load_dataset_bin(o.val);
    } else {
        auto parts = split_dataset(train, o.holdout, o.seed);
        train = std::move(parts.first);
        val = std::move(parts.second);
    }

    TrainConfig tc;
    tc.epochs = o.epochs;
    tc.learning_rate = o.lr;
    tc.momentum = o.momentum;
    tc.batch_size = o.batch;
    tc.seed = o.seed;
    TrainResult r;
    try {
        r = train_base(spec, train, val, tc);
    } catch (const TrainingError& e) {
        std::cerr << "error: " << e.what() << '\n';
        m.failures.emplace_back(e.what());
        return kNumeric;
    }
    save(r.checkpoint, dir / "base.ckpt");
    std::ofstream log(dir / "train_log.csv");
    log << "epoch,train_loss,train_accuracy,val_accuracy\n";
    for (const auto& e : r.log) {
        log << e.epoch << ',' << e.train_loss << ',' << e.train_accuracy << ',' << e.val_accuracy << '\n';
        std::cout << "epoch " << e.epoch << "  loss " << e.train_loss << "  train acc " << e.train_accuracy
                  << "  val acc " << e.val_accuracy << '\n';
    }
    log.close();
    std::cout << "best epoch " << r.best_epoch << " (val acc " << r.best_val_accuracy << "), "
              << spec.parameter_count() << " parameters -> " << (dir / "base.ckpt").string() << '\n';
    record_outputs(dir, m);
    return kOk;
}

int cmd_attack(const AttackOptions& o, const fs::path& dir, RunManifest& m) {
    const AttackConfig cfg = attack_config(o);
    m.seeds["attack"] = cfg.seed;
    const AttackInputs in = load_attack_inputs(o, m, true);
    PointOutcome p = attack_point(in, cfg, dir, o.threads);
    if (!p.error.empty()) {
        std::cerr << "error: " << p.error << '\n';
        m.failures.push_back(p.error);
        record_outputs(dir, m);
        return p.numeric ? kNumeric : kUsage;
    }
    append_sweep_csv(p.report, dir / "sweep.csv");
    std::cout << format_report_table({p.report});
    record_outputs(dir, m);
    return kOk;
}

int cmd_sweep(const AttackOptions& o, const fs::path& dir, RunManifest& m) {
    if (o.epsilons.empty() && o.lambdas.empty()) throw ValidationError("empty grid: give --epsilons and/or --lambdas");
    std::vector<double> eps, lambdas;
    for (const auto& s : o.epsilons.empty() ? std::vector<std::string>{o.epsilon} : split_list(o.epsilons))
        eps.push_back(parse_epsilon(s));
    if (o.lambdas.empty()) lambdas.push_back(o.lambda);
    for (const auto& s : o.lambdas.empty() ? std::vector<std::string>{} : split_list(o.lambdas))
        lambdas.push_back(parse_double(s));
    if (eps.empty() || lambdas.empty()) throw ValidationError("empty grid");
    if (o.jobs < 1) throw ValidationError("--jobs must be >= 1");

    AttackConfig proto = attack_config(o);
    m.seeds["attack"] = proto.seed;
    std::vector<AttackConfig> grid;
    for (double e : eps)
        for (double l : lambdas) {
            AttackConfig c = proto;
            c.epsilon = e;
            c.lambda = l;
            c.validate();
            grid.push_back(c);
        }
    const AttackInputs in = load_attack_inputs(o, m, true);

    auto point_dir = [&](const AttackConfig& c) {
        std::ostringstream name;
        name << "eps=" << format_epsilon(c.epsilon) << "_lambda=" << c.lambda;
        return dir / name.str();
    };
    std::vector<PointOutcome> outcomes(grid.size());
    for (size_t lo = 0; lo < grid.size(); lo += static_cast<size_t>(o.jobs)) {
        const size_t hi = std::min(grid.size(), lo + static_cast<size_t>(o.jobs));
        std::vector<std::future<PointOutcome>> running;
        for (size_t i = lo; i < hi; ++i) {
            running.push_back(std::async(std::launch::async, [&, i] {
                return attack_point(in, grid[i], point_dir(grid[i]), o.threads);
            }));
        }
        for (size_t i = lo; i < hi; ++i) outcomes[i] = running[i - lo].get();
    }

    std::vector<EvalReport> ok;
    bool numeric = false;
    for (size_t i = 0; i < grid.size(); ++i) {
        if (outcomes[i].error.empty()) {
            append_sweep_csv(outcomes[i].report, dir / "sweep.csv");
            ok.push_back(outcomes[i].report);
        } else {
            const std::string msg = point_dir(grid[i]).filename().string() + ": " + outcomes[i].error;
            std::cerr << "error: " << msg << '\n';
            m.failures.push_back(msg);
            numeric = numeric || outcomes[i].numeric;
        }
    }
    std::cout << format_report_table(ok);
    record_outputs(dir, m);
    if (m.failures.empty()) return kOk;
    return numeric ? kNumeric : kUsage;
}

int cmd_eval(const AttackOptions& o, const fs::path& dir, RunManifest& m) {
    const AttackConfig cfg = attack_config(o);
    const AttackInputs in = load_attack_inputs(o, m, false);
    Checkpoint attacked = in.base;
    if (!o.attacked.empty()) {
        require_file(o.attacked, "attacked");
        m.add_input(o.attacked);
        attacked = load(o.attacked);
    }
    EvalReport r = build_report(in.base, attacked, in.test, in.trigger, cfg, o.threads);
    if (!o.train.empty()) r.train_dataset = o.train;
    write_report_json(r, dir / "report.json");
    std::cout << format_report_table({r});
    record_outputs(dir, m);
    return kOk;
}

int cmd_weight_diff(const DiffOptions& o) {
    require_file(o.a, "a");
    require_file(o.b, "b");
    const Checkpoint a = load(o.a);
    const Checkpoint b = load(o.b);
    if (!(a.spec == b.spec)) throw ValidationError("checkpoints have different model specs");
    std::cout << std::left << std::setw(22) << "tensor" << std::right << std::setw(10) << "count" << std::setw(12)
              << "%dL1" << std::setw(12) << "%dL2" << std::setw(12) << "%dLinf" << std::setw(14) << "max|d|" << '\n';
    auto row = [](const std::string& name, std::span<const float> x, std::span<const float> y) {
        std::cout << std::left << std::setw(22) << name << std::right << std::setw(10) << x.size() << std::setw(12)
                  << pct_or_na(x, y, Norm::L1) << std::setw(12) << pct_or_na(x, y, Norm::L2) << std::setw(12)
                  << pct_or_na(x, y, Norm::Linf) << std::setw(14) << std::scientific << std::setprecision(6)
                  << diff_norm(x, y, Norm::Linf) << std::defaultfloat << '\n';
    };
    const auto& ea = a.params.entries();
    const auto& eb = b.params.entries();
    for (size_t i = 0; i < ea.size(); ++i) row(ea[i].name, ea[i].tensor.data(), eb[i].tensor.data());
    const Tensor fa = flatten_params(a.params);
    const Tensor fb = flatten_params(b.params);
    row("(all)", fa.data(), fb.data());
    return kOk;
}

}  // namespace awp::cli
