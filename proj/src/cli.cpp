#include "transnet/cli.hpp"

#include <sys/wait.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <ostream>

#include "transnet/bytes.hpp"
#include "transnet/detect.hpp"
#include "transnet/eval.hpp"
#include "transnet/model.hpp"
#include "transnet/parallel.hpp"
#include "transnet/synth.hpp"
#include "transnet/train.hpp"
#include "transnet/weights_io.hpp"

namespace transnet {
namespace fs = std::filesystem;

Video frames_from_stream(std::span<const std::uint8_t> stream, int width, int height) {
    Video video;
    video.width = width;
    video.height = height;
    const std::size_t frame = video.frame_bytes();
    if (frame == 0) throw DataError("invalid frame size");
    if (stream.empty()) throw DataError("decoder produced zero frames");
    if (stream.size() % frame != 0) {
        throw DataError("truncated frame: " + std::to_string(stream.size() % frame) + " trailing bytes after " +
                        std::to_string(stream.size() / frame) + " whole " + std::to_string(width) + "x" +
                        std::to_string(height) + " frames");
    }
    video.pixels.assign(stream.begin(), stream.end());
    return video;
}

std::vector<std::uint8_t> run_decoder(const std::string& command, const std::string& input) {
    std::string quoted = "'";
    for (char c : input) quoted += c == '\'' ? std::string("'\\''") : std::string(1, c);
    quoted += "'";
    std::string cmd = command;
    if (const auto pos = cmd.find("{input}"); pos != std::string::npos) {
        cmd.replace(pos, 7, quoted);
    } else {
        cmd += " " + quoted;
    }
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) throw DataError("could not start decoder: " + command);
    std::vector<std::uint8_t> data;
    std::uint8_t buffer[1 << 16];
    for (std::size_t n; (n = std::fread(buffer, 1, sizeof(buffer), pipe)) > 0;) data.insert(data.end(), buffer, buffer + n);
    const int status = ::pclose(pipe);
    if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        const int code = (status != -1 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
        throw DataError("decoder exited with status " + std::to_string(code) + ": " + cmd);
    }
    return data;
}

namespace {

struct ModelFlags {
    ModelConfig config;

    void add_to(CLI::App* app) {
        app->add_option("--cells-per-block", config.cells_per_block, "DDCNN cells per block (S)")->capture_default_str();
        app->add_option("--blocks", config.blocks, "Number of SDDCNN blocks (L)")->capture_default_str();
        app->add_option("--filters", config.filters, "Filters per branch in the first block (F)")->capture_default_str();
        app->add_option("--dense-units", config.dense_units, "Dense layer width (D)")->capture_default_str();
        app->add_option("--window", config.window, "Frames per forward pass (N)")->capture_default_str();
        app->add_option("--width", config.width, "Frame width in pixels")->capture_default_str();
        app->add_option("--height", config.height, "Frame height in pixels")->capture_default_str();
    }
};

const std::string& make_parent(const std::string& path) {
    if (const fs::path parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
    return path;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    bytes::write_file(path.string(), std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string format_fixed(double v, int digits = 6) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::string sequence_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "seq_%05zu", i);
    return buf;
}

std::vector<double> parse_thetas(const std::string& text) {
    if (text.empty()) return default_thetas();
    std::vector<double> thetas;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = text.find(',', pos);
        const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        try {
            std::size_t used = 0;
            const double v = std::stod(item, &used);
            if (used != item.size() || !(v > 0 && v < 1)) throw std::invalid_argument(item);
            thetas.push_back(v);
        } catch (const std::logic_error&) {
            throw CLI::ValidationError("--thetas", "expected comma-separated values in (0,1), got '" + item + "'");
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return thetas;
}

struct Cli {
    std::ostream& out;
    std::ostream& err;
    CLI::App app{"Shot boundary detection with dilated 3D convolutions", "transnet"};
    int threads = 0;
    std::string resolved_config;

    // ingest
    std::string ingest_decoder, ingest_input, ingest_out;
    int ingest_width = 48, ingest_height = 27;

    // synth
    std::string synth_mode = "sequences", synth_manifest, synth_out, synth_name = "video";
    std::size_t synth_count = 100, synth_frames = 500, synth_shots = 60, synth_min_len = 40, synth_max_len = 160;
    std::uint64_t synth_seed = 0;
    double synth_cut_probability = 0.5;
    bool synth_keep_all = false;
    ModelFlags synth_model;

    // train
    std::string train_manifest, train_out;
    ModelFlags train_model;
    TrainPlan plan;
    std::size_t val_count = 20;
    bool train_keep_all = false;

    // detect
    std::string detect_weights, detect_frames, detect_out, detect_transitions, detect_track;
    double detect_theta = 0.1;

    // eval
    std::string eval_pred_dir, eval_gt_dir, eval_out;

    // sweep
    std::string sweep_weights, sweep_thetas, sweep_out;
    std::vector<std::string> sweep_frames, sweep_gt;

    // info
    std::string info_weights;
    ModelFlags info_model;

    CLI::App* ingest = nullptr;
    CLI::App* synth = nullptr;
    CLI::App* train = nullptr;
    CLI::App* detect = nullptr;
    CLI::App* eval = nullptr;
    CLI::App* sweep = nullptr;
    CLI::App* info = nullptr;

    Cli(std::ostream& o, std::ostream& e) : out(o), err(e) {
        app.require_subcommand(1);
        app.set_config("--config", "", "TOML file of option values; command-line flags take precedence");
        app.add_option("--threads", threads, "Worker threads (0 = all cores)")
            ->envname("TRANSNET_THREADS")
            ->capture_default_str();

        ingest = app.add_subcommand("ingest", "Decode a video into a raw frame file via an external decoder");
        ingest->add_option("--decoder", ingest_decoder,
                           "Shell command writing raw RGB24 frames to stdout; {input} is replaced by the video path")
            ->required();
        ingest->add_option("--input", ingest_input, "Input video")->required();
        ingest->add_option("--out", ingest_out, "Output raw frame file")->required();
        ingest->add_option("--width", ingest_width)->capture_default_str();
        ingest->add_option("--height", ingest_height)->capture_default_str();

        synth = app.add_subcommand("synth", "Generate synthetic shot pools, training sequences or videos");
        synth->add_option("--mode", synth_mode, "pool | sequences | video")
            ->check(CLI::IsMember({"pool", "sequences", "video"}))
            ->capture_default_str();
        synth->add_option("--manifest", synth_manifest, "Shot pool manifest (sequences, video)");
        synth->add_option("--out", synth_out, "Output directory")->required();
        synth->add_option("--count", synth_count, "Sequences to generate")->capture_default_str();
        synth->add_option("--frames", synth_frames, "Frames in a synthetic video")->capture_default_str();
        synth->add_option("--name", synth_name, "Base name of a synthetic video")->capture_default_str();
        synth->add_option("--shots", synth_shots, "Shots in a synthetic pool")->capture_default_str();
        synth->add_option("--min-shot-length", synth_min_len)->capture_default_str();
        synth->add_option("--max-shot-length", synth_max_len)->capture_default_str();
        synth->add_option("--seed", synth_seed)->capture_default_str();
        synth->add_option("--cut-probability", synth_cut_probability)->check(CLI::Range(0.0, 1.0))->capture_default_str();
        synth->add_flag("--keep-all-segments", synth_keep_all, "Do not thin the pool to every other segment");
        synth_model.add_to(synth);

        train = app.add_subcommand("train", "Train on synthetic transitions drawn from a shot pool");
        train->add_option("--manifest", train_manifest, "Shot pool manifest")->required();
        train->add_option("--out", train_out, "Run directory")->required();
        train_model.add_to(train);
        train->add_option("--epochs", plan.epochs)->capture_default_str();
        train->add_option("--batches-per-epoch", plan.batches_per_epoch)->capture_default_str();
        train->add_option("--batch-size", plan.batch_size)->capture_default_str();
        train->add_option("--learning-rate", plan.learning_rate)->capture_default_str();
        train->add_option("--seed", plan.seed)->capture_default_str();
        train->add_option("--cut-probability", plan.cut_probability)->check(CLI::Range(0.0, 1.0))->capture_default_str();
        train->add_option("--theta", plan.theta, "Validation threshold")->capture_default_str();
        train->add_option("--clip-norm", plan.clip_norm, "Global gradient norm clip (0 = off)")->capture_default_str();
        train->add_option("--prefetch", plan.prefetch, "Batches synthesized ahead (0 = inline)")->capture_default_str();
        train->add_option("--val-count", val_count, "Synthetic validation sequences")->capture_default_str();
        train->add_flag("--keep-all-segments", train_keep_all, "Do not thin the pool to every other segment");

        detect = app.add_subcommand("detect", "Detect shots in a raw frame file");
        detect->add_option("--weights", detect_weights)->required();
        detect->add_option("--frames", detect_frames)->required();
        detect->add_option("--theta", detect_theta)->check(CLI::Range(0.0, 1.0))->capture_default_str();
        detect->add_option("--out", detect_out, "Shot list output")->required();
        detect->add_option("--transitions", detect_transitions, "Transition list output");
        detect->add_option("--track", detect_track, "Per-frame probability CSV output");

        eval = app.add_subcommand("eval", "Score predicted transition lists against ground truth");
        eval->add_option("--pred-dir", eval_pred_dir, "Directory of predicted transition lists")->required();
        eval->add_option("--gt-dir", eval_gt_dir, "Directory of ground-truth transition lists (*.txt)")->required();
        eval->add_option("--out", eval_out, "Report CSV")->required();

        sweep = app.add_subcommand("sweep", "Precision/recall/F1 over a range of thresholds");
        sweep->add_option("--weights", sweep_weights)->required();
        sweep->add_option("--frames", sweep_frames, "Raw frame files")->required();
        sweep->add_option("--gt", sweep_gt, "Ground-truth transition lists, one per --frames")->required();
        sweep->add_option("--thetas", sweep_thetas, "Comma-separated thresholds (default 0.05..0.9)");
        sweep->add_option("--out", sweep_out, "PR CSV")->required();

        info = app.add_subcommand("info", "Parameter count, receptive field and layer shapes");
        info->add_option("--weights", info_weights, "Read the configuration from a weight file");
        info_model.add_to(info);

        for (auto* sub : {ingest, synth, train, detect, eval, sweep, info}) sub->configurable();
    }

    int run(int argc, const char* const* argv) {
        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e, out, err);
            return code == 0 ? kExitOk : kExitUsage;
        }
        for (auto* sub : app.get_subcommands()) {
            resolved_config = "threads=" + std::to_string(threads) + "\n[" + sub->get_name() + "]\n" +
                              sub->config_to_str(true, false);
        }
        try {
            ScopedThreadCount scope(threads > 0 ? threads : default_thread_count());
            if (*ingest) return run_ingest();
            if (*synth) return run_synth();
            if (*train) return run_train();
            if (*detect) return run_detect();
            if (*eval) return run_eval();
            if (*sweep) return run_sweep();
            if (*info) return run_info();
        } catch (const CLI::Error& e) {
            err << "error: " << e.what() << "\n";
            return kExitUsage;
        } catch (const NumericError& e) {
            err << "numeric error: " << e.what() << "\n";
            return kExitNumeric;
        } catch (const std::exception& e) {
            err << "error: " << e.what() << "\n";
            return kExitData;
        }
        return kExitUsage;
    }

    void write_provenance(const fs::path& path) const { write_text(path, resolved_config); }

    int run_ingest() {
        const auto stream = run_decoder(ingest_decoder, ingest_input);
        const Video video = frames_from_stream(stream, ingest_width, ingest_height);
        save_raw_frames(video, make_parent(ingest_out));
        out << "frames: " << video.frame_count() << "\n";
        return kExitOk;
    }

    int run_synth() {
        const fs::path dir = synth_out;
        fs::create_directories(dir);
        const ModelConfig& cfg = synth_model.config;
        if (synth_mode == "pool") {
            auto src = synthetic_source(synth_shots, synth_min_len, synth_max_len, cfg.width, cfg.height, synth_seed);
            save_raw_frames(src.video, dir / "pool.tnsf");
            for (auto& seg : src.segments) seg.frames_file = "pool.tnsf";
            save_manifest(src.segments, dir / "manifest.json");
            out << "shots: " << src.segments.size() << ", frames: " << src.video.frame_count() << "\n";
        } else {
            if (synth_manifest.empty()) throw CLI::ValidationError("--manifest", "required for mode " + synth_mode);
            const ShotPool pool = load_shot_pool(synth_manifest, {!synth_keep_all, 5});
            Rng rng(synth_seed);
            if (synth_mode == "video") {
                const auto sv = make_synthetic_video(pool, synth_frames, synth_cut_probability, rng);
                save_raw_frames(sv.video, dir / (synth_name + ".tnsf"));
                save_intervals(sv.transitions, dir / (synth_name + ".txt"));
                out << "frames: " << sv.video.frame_count() << ", transitions: " << sv.transitions.size() << "\n";
            } else {
                const auto seqs = sample_batch(
                    pool, {static_cast<int>(synth_count), cfg.window, synth_cut_probability}, rng);
                nlohmann::json index = nlohmann::json::array();
                for (std::size_t i = 0; i < seqs.size(); ++i) {
                    const auto& s = seqs[i];
                    const std::string name = sequence_name(i);
                    save_raw_frames(s.frames, dir / (name + ".tnsf"));
                    save_intervals({s.transition}, dir / (name + ".txt"));
                    const auto label = std::find(s.labels.begin(), s.labels.end(), true) - s.labels.begin();
                    index.push_back({{"frames_file", name + ".tnsf"},
                                     {"kind", to_string(s.kind)},
                                     {"transition", {s.transition.start, s.transition.end}},
                                     {"dissolve_length", s.dissolve_length},
                                     {"label_frame", label}});
                }
                write_text(dir / "sequences.json", index.dump(2) + "\n");
                out << "sequences: " << seqs.size() << "\n";
            }
        }
        write_provenance(dir / "run_config.toml");
        return kExitOk;
    }

    int run_train() {
        const fs::path dir = train_out;
        fs::create_directories(dir);
        write_provenance(dir / "run_config.toml");
        const ModelConfig& cfg = train_model.config;
        cfg.validate();
        const ShotPool pool = load_shot_pool(train_manifest, {!train_keep_all, 5});
        if (pool.width != cfg.width || pool.height != cfg.height) {
            throw DataError("shot pool frames are " + std::to_string(pool.width) + "x" + std::to_string(pool.height) +
                            " but the model expects " + std::to_string(cfg.width) + "x" + std::to_string(cfg.height));
        }
        Rng val_rng(plan.seed ^ 0x9e3779b97f4a7c15ULL);
        const auto validation = validation_from_sequences(
            sample_batch(pool, {static_cast<int>(val_count), cfg.window, plan.cut_probability}, val_rng));
        TrainPlan p = plan;
        p.checkpoint_dir = dir / "checkpoints";
        const TrainResult result = transnet::train(cfg, pool, validation, p);
        write_text(dir / "history.csv", format_history_csv(result.history));
        save_weights(result.best_weights, cfg, dir / "best.tnsw");
        for (const auto& r : result.history) {
            out << "epoch " << r.epoch << ": loss " << format_fixed(r.mean_loss, 4) << ", val F1 "
                << format_fixed(r.val_f1, 4) << "\n";
        }
        if (result.diverged) {
            err << "training diverged: " << result.message << "\n";
            return kExitNumeric;
        }
        out << "best epoch: " << result.best_epoch << "\n";
        return kExitOk;
    }

    int run_detect() {
        const auto loaded = load_weights(detect_weights);
        const Video video = load_raw_frames(detect_frames);
        const auto begin = std::chrono::steady_clock::now();
        const auto track = predict_video(loaded.config, loaded.weights, video);
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
        const auto result = shots_from_predictions(track, detect_theta);
        save_intervals(result.shots, make_parent(detect_out));
        if (!detect_transitions.empty()) save_intervals(result.transitions, make_parent(detect_transitions));
        if (!detect_track.empty()) {
            std::string csv = "frame,p_boundary\n";
            for (std::size_t i = 0; i < track.size(); ++i) csv += std::to_string(i) + "," + format_fixed(track[i], 9) + "\n";
            write_text(detect_track, csv);
        }
        write_provenance(detect_out + ".run.toml");
        out << "frames: " << track.size() << ", shots: " << result.shots.size()
            << ", transitions: " << result.transitions.size() << ", frames/sec: "
            << format_fixed(seconds > 0 ? static_cast<double>(track.size()) / seconds : 0.0, 1) << "\n";
        return kExitOk;
    }

    int run_eval() {
        std::vector<fs::path> gt_files;
        for (const auto& entry : fs::directory_iterator(eval_gt_dir)) {
            if (entry.is_regular_file() && entry.path().extension() == ".txt") gt_files.push_back(entry.path());
        }
        if (gt_files.empty()) throw DataError("no ground-truth *.txt files in '" + eval_gt_dir + "'");
        std::sort(gt_files.begin(), gt_files.end());
        std::vector<VideoReport> reports;
        std::vector<EvalCounts> counts;
        for (const auto& gt_path : gt_files) {
            const fs::path pred_path = fs::path(eval_pred_dir) / gt_path.filename();
            if (!fs::exists(pred_path)) throw DataError("missing prediction file '" + pred_path.string() + "'");
            const auto c = match_transitions(load_intervals(pred_path), load_intervals(gt_path));
            reports.push_back({gt_path.stem().string(), c});
            counts.push_back(c);
        }
        write_text(eval_out, format_report_csv(reports));
        write_provenance(eval_out + ".run.toml");
        out << "videos: " << reports.size() << ", average F1: " << format_fixed(average_f1(counts), 4)
            << ", overall F1: " << format_fixed(overall_f1(counts), 4) << "\n";
        return kExitOk;
    }

    int run_sweep() {
        if (sweep_frames.size() != sweep_gt.size()) {
            throw CLI::ValidationError("--gt", "give exactly one --gt per --frames");
        }
        const auto thetas = parse_thetas(sweep_thetas);
        const auto loaded = load_weights(sweep_weights);
        std::vector<PredictionTrack> tracks;
        std::vector<IntervalList> gts;
        for (std::size_t i = 0; i < sweep_frames.size(); ++i) {
            tracks.push_back(predict_video(loaded.config, loaded.weights, load_raw_frames(sweep_frames[i])));
            gts.push_back(load_intervals(sweep_gt[i]));
        }
        const auto points = pr_sweep(tracks, gts, thetas);
        write_text(sweep_out, format_pr_csv(points));
        write_provenance(sweep_out + ".run.toml");
        out << "thresholds: " << points.size() << "\n";
        return kExitOk;
    }

    int run_info() {
        ModelConfig cfg = info_model.config;
        if (!info_weights.empty()) cfg = load_weights(info_weights).config;
        cfg.validate();
        out << "config: S=" << cfg.cells_per_block << " L=" << cfg.blocks << " F=" << cfg.filters
            << " D=" << cfg.dense_units << " N=" << cfg.window << " frames " << cfg.width << "x" << cfg.height << "\n";
        out << "parameters: " << param_count(cfg) << "\n";
        out << "temporal receptive field: " << receptive_field_temporal(cfg) << " frames\n";
        for (const auto& layer : layer_table(cfg)) {
            out << "  " << layer.name << std::string(layer.name.size() < 16 ? 16 - layer.name.size() : 1, ' ')
                << shape_string(layer.output_shape) << "  params " << layer.params << "\n";
        }
        return kExitOk;
    }
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    auto cli = std::make_unique<Cli>(out, err);
    return cli->run(argc, argv);
}

}  // namespace transnet
