#include "rld/cli.hpp"

#include "rld/dataio.hpp"
#include "rld/explain.hpp"
#include "rld/metrics.hpp"
#include "rld/numkit.hpp"
#include "rld/teacher.hpp"
#include "rld/vae.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace rld {

namespace {

// Substream ids off the master seed; per-image streams come after the
// fixed ones so training and explanation never share draws.
constexpr std::uint64_t kSynthStream = 0;
constexpr std::uint64_t kVaeStream = 1;
constexpr std::uint64_t kTeacherStream = 2;
constexpr std::uint64_t kImageStreamBase = 4;

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::vector<std::size_t> parse_size_list(const std::string& spec, const char* flag) {
    std::vector<std::size_t> out;
    std::size_t start = 0;
    while (start <= spec.size()) {
        const std::size_t comma = spec.find(',', start);
        const std::string tok = spec.substr(start, comma == std::string::npos
                                                       ? std::string::npos
                                                       : comma - start);
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw ParamError(std::string(flag) + ": cannot parse '" + tok +
                             "' as a nonnegative integer");
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

ImageDataset load_dataset(const RunConfig& cfg) {
    const bool has_idx = !cfg.idx_images.empty() || !cfg.idx_labels.empty();
    const bool has_synth = !cfg.synth_spec.empty();
    if (has_idx && has_synth)
        throw ParamError("give either --idx-images/--idx-labels or --synth, not both");
    if (!has_idx && !has_synth)
        throw ParamError("no data source: give --idx-images/--idx-labels or --synth n,h,w,k");
    if (has_idx) {
        if (cfg.idx_images.empty() || cfg.idx_labels.empty())
            throw ParamError("--idx-images and --idx-labels must be given together");
        return load_idx(cfg.idx_images, cfg.idx_labels);
    }
    const std::vector<std::size_t> q = parse_size_list(cfg.synth_spec, "--synth");
    if (q.size() != 4) throw ParamError("--synth expects exactly n,h,w,k");
    Rng rng = Rng(cfg.seed).derive(kSynthStream);
    return synth_shapes(q[0], q[1], q[2], static_cast<int>(q[3]), rng);
}

void check_common(const RunConfig& cfg) {
    if (cfg.lambda1 < 0.0f || cfg.lambda2 < 0.0f)
        throw ParamError("--lambda1 and --lambda2 must be nonnegative");
    if (cfg.n_samples < 2) throw ParamError("--n-samples must be at least 2");
    if (cfg.tau < 0.0f) throw ParamError("--tau must be nonnegative");
    if (!(cfg.step_fraction > 0.0 && cfg.step_fraction <= 1.0))
        throw ParamError("--step-fraction must be in (0, 1]");
}

ExplainConfig explain_config(const RunConfig& cfg) {
    ExplainConfig ec;
    ec.n_samples = cfg.n_samples;
    ec.tau = cfg.tau;
    ec.student.lambda1 = cfg.lambda1;
    ec.student.lambda2 = cfg.lambda2;
    return ec;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open " + path + " for writing");
    f << text;
    if (!f) throw FormatError("failed writing " + path);
}

int cmd_synth_data(const RunConfig& cfg, std::ostream& out) {
    const ImageDataset data = load_dataset(cfg);
    fs::create_directories(cfg.out_dir);
    const std::string images = (fs::path(cfg.out_dir) / "images.idx").string();
    const std::string labels = (fs::path(cfg.out_dir) / "labels.idx").string();
    write_idx(data, images, labels);
    const ImageShape shape = data.shape();
    out << "wrote " << data.count() << " images (" << shape.h << "x" << shape.w << ", "
        << data.num_classes << " classes) to " << images << " and " << labels << "\n";
    return 0;
}

int cmd_train_vae(const RunConfig& cfg, std::ostream& out) {
    const ImageDataset data = load_dataset(cfg);
    VaeConfig vc;
    vc.latent_dim = cfg.latent_dim;
    if (cfg.epochs > 0) vc.epochs = cfg.epochs;
    Rng rng = Rng(cfg.seed).derive(kVaeStream);
    const VaeModel model = train_vae(data, vc, rng);
    for (std::size_t i = 0; i < model.epoch_losses.size(); ++i)
        out << "epoch " << (i + 1) << " loss " << fmt6(model.epoch_losses[i]) << "\n";
    fs::create_directories(cfg.out_dir);
    const std::string path = (fs::path(cfg.out_dir) / "vae.rldm").string();
    save_model(vae_to_archive(model), path);
    out << "wrote " << path << "\n";
    return 0;
}

int cmd_train_teacher(const RunConfig& cfg, std::ostream& out) {
    const ImageDataset data = load_dataset(cfg);
    TeacherConfig tc;
    if (cfg.epochs > 0) tc.epochs = cfg.epochs;
    Rng rng = Rng(cfg.seed).derive(kTeacherStream);
    const TeacherModel model = train_teacher(data, tc, rng);
    for (std::size_t i = 0; i < model.epoch_losses.size(); ++i)
        out << "epoch " << (i + 1) << " loss " << fmt6(model.epoch_losses[i]) << "\n";
    out << "train accuracy " << fmt6(model.train_accuracy) << "\n";
    fs::create_directories(cfg.out_dir);
    const std::string path = (fs::path(cfg.out_dir) / "teacher.rldm").string();
    save_model(teacher_to_archive(model), path);
    out << "wrote " << path << "\n";
    return 0;
}

std::string explain_summary(std::size_t index, const ExplainResult& res) {
    std::string s;
    s += "index " + std::to_string(index) + "\n";
    s += "anchor class " + std::to_string(res.neighborhood.anchor_class) + "\n";
    s += "tau used " + fmt6(res.neighborhood.tau_used) + "\n";
    s += "samples " + std::to_string(res.neighborhood.size()) + "\n";
    s += "kept count " + std::to_string(res.neighborhood.count_label(1)) + "\n";
    s += "shifted count " + std::to_string(res.neighborhood.count_label(0)) + "\n";
    s += "retries " + std::to_string(res.retries) + "\n";
    s += std::string("degenerate warning ") + (res.degenerate_warning ? "yes" : "no") + "\n";
    s += "student loss " + fmt6(res.student.final_loss) + "\n";
    s += "relabel accuracy " + fmt6(res.student.relabel_accuracy) + "\n";
    return s;
}

int cmd_explain(const RunConfig& cfg, std::ostream& out) {
    const TeacherModel teacher = teacher_from_archive(load_model(cfg.teacher_path));
    const VaeModel vae = vae_from_archive(load_model(cfg.vae_path));
    const ImageDataset data = load_dataset(cfg);
    if (cfg.index >= data.count())
        throw ParamError("--index " + std::to_string(cfg.index) + " out of range, dataset has " +
                         std::to_string(data.count()) + " images");
    const DenseTensor anchor = data.image(cfg.index);
    Rng rng = Rng(cfg.seed).derive(kImageStreamBase + cfg.index);
    const ExplainResult res =
        explain(teacher, vae, anchor, data.shape(), explain_config(cfg), rng);

    fs::create_directories(cfg.out_dir);
    const std::string tag = std::to_string(cfg.index);
    const std::string pgm = (fs::path(cfg.out_dir) / ("saliency_" + tag + ".pgm")).string();
    const std::string rldm = (fs::path(cfg.out_dir) / ("student_" + tag + ".rldm")).string();
    const std::string txt = (fs::path(cfg.out_dir) / ("explain_" + tag + ".txt")).string();

    write_pgm(res.saliency.normalized, pgm);
    ModelArchive archive;
    archive.add("s.w", res.student.w);
    archive.add_scalar("s.b", res.student.b);
    save_model(archive, rldm);
    const std::string summary = explain_summary(cfg.index, res);
    write_text(txt, summary);
    out << summary;
    out << "wrote " << pgm << ", " << rldm << ", " << txt << "\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
    const TeacherModel teacher = teacher_from_archive(load_model(cfg.teacher_path));
    const VaeModel vae = vae_from_archive(load_model(cfg.vae_path));
    const ImageDataset data = load_dataset(cfg);

    std::vector<std::size_t> indices;
    if (!cfg.indices_spec.empty()) {
        indices = parse_size_list(cfg.indices_spec, "--indices");
    } else {
        for (std::size_t i = 0; i < std::min<std::size_t>(20, data.count()); ++i)
            indices.push_back(i);
    }
    if (indices.empty()) throw ParamError("--indices: no images selected");
    for (std::size_t idx : indices)
        if (idx >= data.count())
            throw ParamError("--indices entry " + std::to_string(idx) +
                             " out of range, dataset has " + std::to_string(data.count()) +
                             " images");

    const ImageShape shape = data.shape();
    const ExplainConfig ec = explain_config(cfg);
    fs::create_directories(cfg.out_dir);

    // mean AUC accumulators: [method][0]=deletion, [1]=insertion
    const char* method_names[3] = {"re-label distillation", "occlusion", "random"};
    double sums[3][2] = {{0, 0}, {0, 0}, {0, 0}};

    for (std::size_t idx : indices) {
        const DenseTensor anchor = data.image(idx);
        Rng rng = Rng(cfg.seed).derive(kImageStreamBase + idx);
        const ExplainResult res = explain(teacher, vae, anchor, shape, ec, rng);
        const SaliencyMap occ =
            occlusion_saliency(teacher, anchor, shape, cfg.window, cfg.stride, cfg.baseline);
        const std::vector<std::size_t> rnd = random_ordering(shape.h, shape.w, rng);

        const std::vector<std::size_t>* orderings[3] = {&res.saliency.ordering, &occ.ordering,
                                                        &rnd};
        PerturbationCurve rld_del, rld_ins;
        for (int m = 0; m < 3; ++m) {
            const PerturbationCurve del = deletion_curve(teacher, anchor, shape, *orderings[m],
                                                         cfg.step_fraction, cfg.baseline);
            const PerturbationCurve ins = insertion_curve(teacher, anchor, shape, *orderings[m],
                                                          cfg.step_fraction, cfg.baseline);
            sums[m][0] += del.auc;
            sums[m][1] += ins.auc;
            if (m == 0) {
                rld_del = del;
                rld_ins = ins;
            }
        }
        const std::string tag = std::to_string(idx);
        write_curve_csv(rld_del.points,
                        (fs::path(cfg.out_dir) / ("deletion_" + tag + ".csv")).string());
        write_curve_csv(rld_ins.points,
                        (fs::path(cfg.out_dir) / ("insertion_" + tag + ".csv")).string());
        out << "image " << idx << " deletion " << fmt6(rld_del.auc) << " insertion "
            << fmt6(rld_ins.auc) << "\n";
    }

    const double n = static_cast<double>(indices.size());
    char row[128];
    std::string table = "method                  deletion  insertion\n";
    for (int m = 0; m < 3; ++m) {
        std::snprintf(row, sizeof(row), "%-22s  %.6f   %.6f\n", method_names[m], sums[m][0] / n,
                      sums[m][1] / n);
        table += row;
    }
    const std::string path = (fs::path(cfg.out_dir) / "summary.txt").string();
    write_text(path, table);
    out << table;
    out << "wrote " << path << "\n";
    return 0;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"re-label distillation: explain a classifier by distilling it into a "
                 "local two-class linear student"};
    app.require_subcommand(1);
    RunConfig cfg;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--seed", cfg.seed, "master RNG seed")->capture_default_str();
        cmd->add_option("--out-dir", cfg.out_dir, "output directory")->capture_default_str();
    };
    auto add_data = [&](CLI::App* cmd) {
        cmd->add_option("--idx-images", cfg.idx_images, "IDX image file");
        cmd->add_option("--idx-labels", cfg.idx_labels, "IDX label file");
        cmd->add_option("--synth", cfg.synth_spec, "synthetic shapes dataset, n,h,w,k");
    };
    auto add_neighborhood = [&](CLI::App* cmd) {
        cmd->add_option("--tau", cfg.tau, "latent perturbation scale")->capture_default_str();
        cmd->add_option("--n-samples", cfg.n_samples, "neighborhood size")
            ->capture_default_str();
        cmd->add_option("--lambda1", cfg.lambda1, "soft-target loss weight")
            ->capture_default_str();
        cmd->add_option("--lambda2", cfg.lambda2, "hard-label loss weight")
            ->capture_default_str();
    };

    CLI::App* synth = app.add_subcommand("synth-data", "write a synthetic shapes dataset");
    add_common(synth);
    synth->add_option("--synth", cfg.synth_spec, "shapes spec, n,h,w,k")->required();

    CLI::App* tvae = app.add_subcommand("train-vae", "train the neighborhood VAE");
    add_common(tvae);
    add_data(tvae);
    tvae->add_option("--latent-dim", cfg.latent_dim, "latent dimension")->capture_default_str();
    tvae->add_option("--epochs", cfg.epochs, "training epochs (0 = default)");

    CLI::App* tteacher = app.add_subcommand("train-teacher", "train the teacher classifier");
    add_common(tteacher);
    add_data(tteacher);
    tteacher->add_option("--epochs", cfg.epochs, "training epochs (0 = default)");

    CLI::App* explain_cmd = app.add_subcommand("explain", "explain one prediction");
    add_common(explain_cmd);
    add_data(explain_cmd);
    add_neighborhood(explain_cmd);
    explain_cmd->add_option("--teacher", cfg.teacher_path, "teacher archive")->required();
    explain_cmd->add_option("--vae", cfg.vae_path, "VAE archive")->required();
    explain_cmd->add_option("--index", cfg.index, "image to explain")->capture_default_str();

    CLI::App* eval_cmd =
        app.add_subcommand("eval", "deletion/insertion evaluation against baselines");
    add_common(eval_cmd);
    add_data(eval_cmd);
    add_neighborhood(eval_cmd);
    eval_cmd->add_option("--teacher", cfg.teacher_path, "teacher archive")->required();
    eval_cmd->add_option("--vae", cfg.vae_path, "VAE archive")->required();
    eval_cmd->add_option("--indices", cfg.indices_spec,
                         "comma-separated image indices (default: first 20)");
    eval_cmd->add_option("--step-fraction", cfg.step_fraction, "pixels per curve step")
        ->capture_default_str();
    eval_cmd->add_option("--baseline", cfg.baseline, "replacement pixel value")
        ->capture_default_str();
    eval_cmd->add_option("--window", cfg.window, "occlusion window (odd)")
        ->capture_default_str();
    eval_cmd->add_option("--stride", cfg.stride, "occlusion stride")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        check_common(cfg);
        if (synth->parsed()) return cmd_synth_data(cfg, out);
        if (tvae->parsed()) return cmd_train_vae(cfg, out);
        if (tteacher->parsed()) return cmd_train_teacher(cfg, out);
        if (explain_cmd->parsed()) return cmd_explain(cfg, out);
        if (eval_cmd->parsed()) return cmd_eval(cfg, out);
        err << "error: no subcommand\n";
        return 2;
    } catch (const TrainError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const ParamError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const ShapeError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<std::string> full;
    full.reserve(args.size() + 1);
    full.emplace_back("rld");
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(full.size());
    for (const std::string& s : full) argv.push_back(s.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

} // namespace rld
