// stppgen: simulate, train, evaluate, and run what-if scenarios for
// spatio-temporal event-sequence generators.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "stpp/baseline.hpp"
#include "stpp/checkpoint.hpp"
#include "stpp/covid.hpp"
#include "stpp/csv.hpp"
#include "stpp/eval.hpp"
#include "stpp/generator.hpp"
#include "stpp/hawkes.hpp"
#include "stpp/kernel.hpp"
#include "stpp/trainer.hpp"
#include "stpp/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stpp;

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_json_file(const fs::path& path, const json& j) {
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return json::parse(in);
}

// The snapshot records everything needed to reproduce the run except the
// output directory itself, so reruns into fresh directories stay bitwise
// identical.
void write_snapshot(const fs::path& out_dir, const std::string& subcommand, const json& resolved) {
    json j;
    j["version"] = kVersion;
    j["subcommand"] = subcommand;
    j["config"] = resolved;
    write_json_file(out_dir / "config_snapshot.json", j);
}

RecurrentMode parse_mode(const std::string& mode) {
    if (mode == "lstm") return RecurrentMode::lstm;
    if (mode == "rnn") return RecurrentMode::rnn;
    throw std::invalid_argument("mode must be 'lstm' or 'rnn'");
}

KernelConfig parse_kernel(const std::string& kind, double bandwidth) {
    KernelConfig cfg;
    cfg.bandwidth = bandwidth;
    if (kind == "gaussian") {
        cfg.kind = KernelKind::gaussian;
    } else if (kind == "matern") {
        cfg.kind = KernelKind::matern;
    } else {
        throw std::invalid_argument("kernel kind must be 'gaussian' or 'matern'");
    }
    return cfg;
}

json scaling_json(const ScalingTransform& tf) {
    return json{{"time_offset", tf.time_offset},
                {"time_scale", tf.time_scale},
                {"space_offset", {tf.space_offset.x(), tf.space_offset.y()}},
                {"space_scale", {tf.space_scale.x(), tf.space_scale.y()}}};
}

ScalingTransform scaling_from(const json& j) {
    ScalingTransform tf;
    tf.time_offset = j.at("time_offset").get<double>();
    tf.time_scale = j.at("time_scale").get<double>();
    const auto so = j.at("space_offset").get<std::vector<double>>();
    const auto ss = j.at("space_scale").get<std::vector<double>>();
    tf.space_offset = {so.at(0), so.at(1)};
    tf.space_scale = {ss.at(0), ss.at(1)};
    return tf;
}

StaticFeatures parse_feature_list(const std::string& csv) {
    std::vector<double> vals;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) vals.push_back(std::stod(item));
    StaticFeatures f(static_cast<Eigen::Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) f[static_cast<Eigen::Index>(i)] = vals[i];
    return f;
}

std::vector<std::string> parse_name_list(const std::string& csv) {
    std::vector<std::string> names;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) names.push_back(item);
    return names;
}

// Rollout features mirror the training pairing: sequence m borrows the
// features of source sequence m mod n when the model expects them.
std::vector<EventSequence> roll_many(const GeneratorParams& params,
                                     const std::vector<EventSequence>& feature_source,
                                     double horizon, int count, std::uint64_t seed) {
    std::vector<EventSequence> out;
    out.reserve(static_cast<std::size_t>(count));
    const StaticFeatures none = StaticFeatures::Zero(0);
    for (int m = 0; m < count; ++m) {
        const StaticFeatures* f = &none;
        if (params.dims.features > 0) {
            if (feature_source.empty()) {
                throw std::invalid_argument("model expects features but none are available");
            }
            const auto& src = feature_source[static_cast<std::size_t>(m) % feature_source.size()];
            if (!src.features || src.features->size() != params.dims.features) {
                throw std::invalid_argument("source sequences lack the features the model expects");
            }
            f = &*src.features;
        }
        out.push_back(
            rollout(params, *f, horizon, derive_seed(seed, 0x9e4e, static_cast<std::uint64_t>(m)))
                .sequence);
    }
    return out;
}

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool serial = false;

    int threads() const { return serial ? 1 : 0; }
};

json config_or_empty(const std::string& path) {
    if (path.empty()) return json::object();
    return read_json_file(path);
}

template <typename T>
T cfg_get(const json& cfg, const std::string& section, const std::string& key, T fallback) {
    if (cfg.contains(section) && cfg[section].contains(key)) {
        return cfg[section][key].get<T>();
    }
    return fallback;
}

int run_simulate(const CommonOpts& common, const json& cfg, int count, double horizon,
                 double base_rate, double a0, double omega, double sigma,
                 const std::vector<double>& region_bounds, const std::string& grid_file) {
    TriggeringModel model;
    model.horizon = cfg_get(cfg, "simulate", "horizon", horizon);
    model.trigger.weight = cfg_get(cfg, "simulate", "a0", a0);
    model.trigger.decay = cfg_get(cfg, "simulate", "omega", omega);
    model.trigger.sigma = cfg_get(cfg, "simulate", "sigma", sigma);
    if (region_bounds.size() != 4) throw std::invalid_argument("--region needs four numbers");
    model.region.min = {region_bounds[0], region_bounds[2]};
    model.region.max = {region_bounds[1], region_bounds[3]};
    if (!grid_file.empty()) {
        const json g = read_json_file(grid_file);
        const auto vals = g.at("values").get<std::vector<double>>();
        const Eigen::Index rows = g.at("rows").get<Eigen::Index>();
        const Eigen::Index cols = g.at("cols").get<Eigen::Index>();
        if (static_cast<Eigen::Index>(vals.size()) != rows * cols) {
            throw std::invalid_argument("base-rate grid has the wrong element count");
        }
        model.base = BaseRate::grid(Eigen::Map<const Eigen::MatrixXd>(vals.data(), rows, cols));
    } else {
        model.base = BaseRate::constant(cfg_get(cfg, "simulate", "base_rate", base_rate));
    }

    const int n = cfg_get(cfg, "simulate", "count", count);
    const auto sequences = simulate_many(model, n, common.seed, common.threads());

    const fs::path out(common.out_dir);
    save_dataset(out / "sequences", sequences);
    save_triggering_model(out / "ground_truth.json", model);

    json resolved;
    resolved["count"] = n;
    resolved["horizon"] = model.horizon;
    resolved["a0"] = model.trigger.weight;
    resolved["omega"] = model.trigger.decay;
    resolved["sigma"] = model.trigger.sigma;
    resolved["region"] = region_bounds;
    resolved["base_rate_grid"] = !grid_file.empty();
    if (grid_file.empty()) resolved["base_rate"] = model.base.value;
    resolved["seed"] = common.seed;
    write_snapshot(out, "simulate", resolved);

    std::size_t total = 0;
    for (const auto& s : sequences) total += s.events.size();
    std::cout << "simulated " << n << " sequences, " << total << " events\n";
    return 0;
}

int run_train(const CommonOpts& common, const json& cfg, const std::string& data_dir,
              const std::string& mode, int iterations, double lr, int batch_expert,
              int batch_learner, int hidden, int mlp_hidden, int noise_dim, double bandwidth,
              const std::string& kernel_kind, const std::string& scaling_file,
              const std::string& schema_csv, int event_unit, const std::string& optimizer,
              bool unbiased, double clip_norm, const std::string& init_checkpoint) {
    const auto expert = load_dataset(data_dir);

    TrainConfig tc;
    tc.learning_rate = cfg_get(cfg, "train", "learning_rate", lr);
    tc.iterations = cfg_get(cfg, "train", "iterations", iterations);
    tc.batch_expert = cfg_get(cfg, "train", "batch_expert", batch_expert);
    tc.batch_learner = cfg_get(cfg, "train", "batch_learner", batch_learner);
    tc.kernel = parse_kernel(cfg_get(cfg, "kernel", "kind", kernel_kind),
                             cfg_get(cfg, "kernel", "bandwidth", bandwidth));
    tc.clip_norm = cfg_get(cfg, "train", "clip_norm", clip_norm);
    tc.unbiased_mmd = cfg_get(cfg, "train", "unbiased", unbiased);
    tc.seed = common.seed;
    tc.threads = common.threads();
    const std::string opt = cfg_get(cfg, "train", "optimizer", optimizer);
    if (opt == "adam") {
        tc.optimizer = OptimizerKind::adam;
    } else if (opt == "sgd") {
        tc.optimizer = OptimizerKind::sgd;
    } else {
        throw std::invalid_argument("optimizer must be 'adam' or 'sgd'");
    }

    GeneratorParams init;
    if (!init_checkpoint.empty()) {
        init = load_generator_checkpoint(init_checkpoint).params;
    } else {
        GeneratorDims dims;
        dims.hidden = cfg_get(cfg, "generator", "hidden", hidden);
        dims.mlp_hidden = cfg_get(cfg, "generator", "mlp_hidden", mlp_hidden);
        dims.noise = cfg_get(cfg, "generator", "noise_dim", noise_dim);
        dims.features =
            expert.front().features ? static_cast<int>(expert.front().features->size()) : 0;
        init = init_generator(parse_mode(cfg_get(cfg, "generator", "mode", mode)), dims,
                              derive_seed(common.seed, 0x1417));
    }

    const TrainReport report = train(expert, tc, init);

    GeneratorCheckpoint ck;
    ck.params = report.params;
    ck.event_unit = event_unit;
    if (!scaling_file.empty()) ck.scaling = scaling_from(read_json_file(scaling_file));
    if (!schema_csv.empty()) {
        ck.feature_schema = parse_name_list(schema_csv);
    } else {
        for (int i = 0; i < ck.params.dims.features; ++i) {
            ck.feature_schema.push_back("f" + std::to_string(i));
        }
    }
    if (static_cast<int>(ck.feature_schema.size()) != ck.params.dims.features) {
        throw std::invalid_argument("feature schema length does not match the data's features");
    }

    const fs::path out(common.out_dir);
    save_generator_checkpoint(out / "checkpoint.json", ck);
    {
        fs::create_directories(out);
        std::ofstream loss(out / "loss.csv");
        loss << "iter,d2\n";
        for (std::size_t i = 0; i < report.d2_trace.size(); ++i) {
            loss << i << ',' << format_double(report.d2_trace[i]) << '\n';
        }
    }

    json resolved;
    resolved["data"] = data_dir;
    resolved["mode"] = init.cell.mode == RecurrentMode::lstm ? "lstm" : "rnn";
    resolved["iterations"] = tc.iterations;
    resolved["learning_rate"] = tc.learning_rate;
    resolved["batch_expert"] = tc.batch_expert;
    resolved["batch_learner"] = tc.batch_learner;
    resolved["kernel_bandwidth"] = tc.kernel.bandwidth;
    resolved["optimizer"] = opt;
    resolved["unbiased"] = tc.unbiased_mmd;
    resolved["clip_norm"] = tc.clip_norm;
    resolved["dims"] = {{"hidden", init.dims.hidden},
                        {"mlp_hidden", init.dims.mlp_hidden},
                        {"noise", init.dims.noise},
                        {"features", init.dims.features}};
    resolved["event_unit"] = event_unit;
    resolved["seed"] = common.seed;
    write_snapshot(out, "train", resolved);

    // wall-clock goes to stderr only; output files stay reproducible
    std::cerr << "trained " << tc.iterations << " iterations in " << report.wall_seconds << " s\n";
    std::cout << "final d2 " << (report.d2_trace.empty() ? 0.0 : report.d2_trace.back()) << "\n";
    return 0;
}

int run_fit_baseline(const CommonOpts& common, const json& cfg, const std::string& data_dir,
                     const std::string& mode, int hidden, int iterations, double lr, int batch,
                     const std::string& scaling_file) {
    const auto data = load_dataset(data_dir);

    BaselineFitConfig bc;
    bc.learning_rate = cfg_get(cfg, "baseline", "learning_rate", lr);
    bc.iterations = cfg_get(cfg, "baseline", "iterations", iterations);
    bc.batch = cfg_get(cfg, "baseline", "batch", batch);
    bc.seed = common.seed;
    bc.threads = common.threads();

    const int h = cfg_get(cfg, "baseline", "hidden", hidden);
    const BaselineParams init = init_baseline(parse_mode(cfg_get(cfg, "baseline", "mode", mode)),
                                              h, derive_seed(common.seed, 0xb0f));
    const BaselineFitReport report = fit_mle(data, bc, init);

    BaselineCheckpoint ck;
    ck.params = report.params;
    if (!scaling_file.empty()) ck.scaling = scaling_from(read_json_file(scaling_file));

    const fs::path out(common.out_dir);
    save_baseline_checkpoint(out / "baseline_checkpoint.json", ck);
    {
        fs::create_directories(out);
        std::ofstream loss(out / "loss.csv");
        loss << "iter,nll\n";
        for (std::size_t i = 0; i < report.nll_trace.size(); ++i) {
            loss << i << ',' << format_double(report.nll_trace[i]) << '\n';
        }
    }

    json resolved;
    resolved["data"] = data_dir;
    resolved["hidden"] = h;
    resolved["iterations"] = bc.iterations;
    resolved["learning_rate"] = bc.learning_rate;
    resolved["batch"] = bc.batch;
    resolved["seed"] = common.seed;
    write_snapshot(out, "fit-baseline", resolved);

    std::cout << "final nll " << (report.nll_trace.empty() ? 0.0 : report.nll_trace.back())
              << "\n";
    return 0;
}

int run_generate(const CommonOpts& common, const std::string& checkpoint, int count,
                 double horizon, const std::string& feature_csv, bool raw) {
    const GeneratorCheckpoint ck = load_generator_checkpoint(checkpoint);
    std::vector<EventSequence> feature_source;
    if (ck.params.dims.features > 0) {
        if (feature_csv.empty()) {
            throw std::invalid_argument(
                "model expects features; pass --feature v1,v2,... matching the schema");
        }
        EventSequence carrier;
        carrier.horizon = horizon;
        carrier.features = parse_feature_list(feature_csv);
        feature_source.push_back(carrier);
    }
    auto sequences = roll_many(ck.params, feature_source, horizon, count, common.seed);
    if (raw) {
        for (auto& seq : sequences) seq = ck.scaling.unscale(seq);
    }

    const fs::path out(common.out_dir);
    save_dataset(out / "sequences", sequences, "gen_");

    json resolved;
    resolved["checkpoint"] = checkpoint;
    resolved["count"] = count;
    resolved["horizon"] = horizon;
    resolved["raw"] = raw;
    if (!feature_csv.empty()) resolved["feature"] = feature_csv;
    resolved["seed"] = common.seed;
    write_snapshot(out, "generate", resolved);

    std::size_t total = 0;
    for (const auto& s : sequences) total += s.events.size();
    std::cout << "generated " << count << " sequences, " << total << " events\n";
    return 0;
}

int run_predict(const CommonOpts& common, const std::string& checkpoint,
                const std::string& history_csv, int n_events, const std::string& feature_csv,
                bool raw) {
    const GeneratorCheckpoint ck = load_generator_checkpoint(checkpoint);
    const EventSequence history = read_event_csv(history_csv);
    StaticFeatures f = StaticFeatures::Zero(0);
    if (ck.params.dims.features > 0) {
        if (!feature_csv.empty()) {
            f = parse_feature_list(feature_csv);
        } else if (history.features) {
            f = *history.features;
        } else {
            throw std::invalid_argument("model expects features; none in the history sidecar");
        }
    }
    EventSequence predicted = condition_and_predict(ck.params, history, f, n_events, common.seed);
    if (raw) predicted = ck.scaling.unscale(predicted);

    const fs::path out(common.out_dir);
    write_event_csv(out / "predicted.csv", predicted);

    json resolved;
    resolved["checkpoint"] = checkpoint;
    resolved["history"] = history_csv;
    resolved["n_events"] = n_events;
    resolved["raw"] = raw;
    resolved["seed"] = common.seed;
    write_snapshot(out, "predict", resolved);

    std::cout << "predicted " << predicted.events.size() << " events\n";
    return 0;
}

int run_reward_field(const CommonOpts& common, const json& cfg, const std::string& expert_dir,
                     const std::string& learner_dir, double bandwidth,
                     const std::string& kernel_kind, int grid, double slice_t, double slice_x,
                     double slice_y, const std::vector<double>& region_bounds) {
    const auto expert_seqs = load_dataset(expert_dir);
    const auto learner_seqs = load_dataset(learner_dir);
    const KernelConfig kernel = parse_kernel(cfg_get(cfg, "kernel", "kind", kernel_kind),
                                             cfg_get(cfg, "kernel", "bandwidth", bandwidth));
    if (region_bounds.size() != 4) throw std::invalid_argument("--region needs four numbers");
    const double horizon = expert_seqs.front().horizon;

    const EmbeddingBatch expert{expert_seqs, BatchRole::expert};
    const EmbeddingBatch learner{learner_seqs, BatchRole::learner};

    const fs::path out(common.out_dir);
    fs::create_directories(out);
    std::ofstream csv(out / "reward_field.csv");
    csv << "t,x,y,r\n";
    // fixed-t slice over the spatial grid
    for (int i = 0; i < grid; ++i) {
        for (int j = 0; j < grid; ++j) {
            const double x =
                region_bounds[0] + (i + 0.5) * (region_bounds[1] - region_bounds[0]) / grid;
            const double y =
                region_bounds[2] + (j + 0.5) * (region_bounds[3] - region_bounds[2]) / grid;
            const double r = reward_field(expert, learner, Event{slice_t, {x, y}}, kernel);
            csv << format_double(slice_t) << ',' << format_double(x) << ',' << format_double(y)
                << ',' << format_double(r) << '\n';
        }
    }
    // fixed-location slice over time
    for (int i = 0; i < grid; ++i) {
        const double t = (i + 0.5) * horizon / grid;
        const double r = reward_field(expert, learner, Event{t, {slice_x, slice_y}}, kernel);
        csv << format_double(t) << ',' << format_double(slice_x) << ',' << format_double(slice_y)
            << ',' << format_double(r) << '\n';
    }

    json resolved;
    resolved["expert"] = expert_dir;
    resolved["learner"] = learner_dir;
    resolved["bandwidth"] = kernel.bandwidth;
    resolved["grid"] = grid;
    resolved["slice_t"] = slice_t;
    resolved["slice_x"] = slice_x;
    resolved["slice_y"] = slice_y;
    resolved["region"] = region_bounds;
    resolved["seed"] = common.seed;
    write_snapshot(out, "reward-field", resolved);

    std::cout << "wrote reward field with " << (grid * grid + grid) << " samples\n";
    return 0;
}

int run_covid_ingest(const CommonOpts& common, const std::string& counties_csv) {
    const CountyDataset dataset = read_county_csv(counties_csv);
    const GroupSpec spec;

    // Raw per-case sequences drive both the scaling fit and the grouping.
    std::vector<EventSequence> raw_sequences(dataset.records.size());
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        raw_sequences[i] = counts_to_events(dataset.records[i], Aggregation::per_case, common.seed);
    }
    std::vector<EventSequence> nonempty;
    for (const auto& seq : raw_sequences) {
        if (!seq.events.empty()) nonempty.push_back(seq);
    }
    if (nonempty.empty()) throw std::runtime_error("covid-ingest: no county reported any case");
    std::vector<std::string> warnings;
    const ScalingTransform tf = fit_scaling(nonempty, &warnings);

    const auto groups = group_counties(dataset.records, spec);
    const fs::path out(common.out_dir);
    fs::create_directories(out);

    json report;
    report["version"] = kVersion;
    report["anchor_date"] = format_date(dataset.anchor_day);
    report["counties"] = json::array();
    json group_sizes = json::object();
    for (std::size_t b = 0; b < groups.size(); ++b) {
        const bool hundred = b == groups.size() - 1;  // hot spots use per-hundred events
        const fs::path group_dir = out / "groups" / spec.bucket_name(b);
        int written = 0;
        for (const std::size_t idx : groups[b]) {
            const CountyRecord& rec = dataset.records[idx];
            EventSequence seq = hundred
                                    ? counts_to_events(rec, Aggregation::per_hundred, common.seed)
                                    : raw_sequences[idx];
            json county;
            county["fips"] = rec.fips;
            county["total_cases"] = rec.total_cases();
            county["bucket"] = spec.bucket_name(b);
            county["lockdown_missing"] = !rec.lockdown_day.has_value();
            county["excluded"] = seq.events.empty();
            report["counties"].push_back(county);
            if (seq.events.empty()) continue;  // kept in the report, not in training data
            EventSequence scaled = tf.scale(seq);
            scaled.features = build_features(rec, tf);
            write_event_csv(group_dir / (rec.fips + ".csv"), scaled);
            ++written;
        }
        group_sizes[spec.bucket_name(b)] = {{"counties", groups[b].size()},
                                            {"written", written},
                                            {"event_unit", hundred ? 100 : 1}};
    }
    report["groups"] = group_sizes;
    report["warnings"] = warnings;
    write_json_file(out / "ingest_report.json", report);

    json scaling = scaling_json(tf);
    scaling["version"] = kVersion;
    scaling["anchor_date"] = format_date(dataset.anchor_day);
    write_json_file(out / "scaling.json", scaling);

    json resolved;
    resolved["counties"] = counties_csv;
    resolved["seed"] = common.seed;
    write_snapshot(out, "covid-ingest", resolved);

    std::cout << "ingested " << dataset.records.size() << " counties into " << spec.bucket_count()
              << " groups\n";
    return 0;
}

int run_covid_scenario(const CommonOpts& common, const std::string& checkpoint,
                       const std::string& counties_csv, const std::string& fips, int shift_days,
                       int rollouts, const std::string& end_date,
                       const std::string& condition_until) {
    const GeneratorCheckpoint ck = load_generator_checkpoint(checkpoint);
    const CountyDataset dataset = read_county_csv(counties_csv);
    const CountyRecord* rec = nullptr;
    for (const auto& r : dataset.records) {
        if (r.fips == fips) {
            rec = &r;
            break;
        }
    }
    if (!rec) throw std::invalid_argument("county " + fips + " not found in " + counties_csv);

    ScenarioSpec spec;
    spec.shift_days = shift_days;
    spec.rollouts = rollouts;
    spec.end_day = static_cast<int>(parse_date(end_date) - dataset.anchor_day);
    if (!condition_until.empty()) {
        spec.condition_until_day =
            static_cast<int>(parse_date(condition_until) - dataset.anchor_day);
    }

    const ScenarioReport report = run_scenario(ck.params, ck.scaling, ck.feature_schema,
                                               ck.event_unit, *rec, spec, common.seed);

    const fs::path out(common.out_dir);
    fs::create_directories(out);
    {
        std::ofstream rf(out / "scenario_report.json");
        rf << scenario_report_to_json(report, end_date) << '\n';
    }

    json resolved;
    resolved["checkpoint"] = checkpoint;
    resolved["counties"] = counties_csv;
    resolved["county"] = fips;
    resolved["shift_days"] = shift_days;
    resolved["rollouts"] = rollouts;
    resolved["end_date"] = end_date;
    if (!condition_until.empty()) resolved["condition_until"] = condition_until;
    resolved["seed"] = common.seed;
    write_snapshot(out, "covid-scenario", resolved);

    std::cout << "scenario " << fips << " shift " << shift_days << "d: " << report.final_mean
              << " +/- " << report.final_std << "\n";
    return 0;
}

int run_eval(const CommonOpts& common, const json& cfg, const std::string& expert_dir,
             const std::string& model_path, int rollouts, int batch, int resamples,
             double bandwidth, const std::string& kernel_kind, int time_bins, int space_bins,
             const std::vector<double>& region_bounds) {
    const auto expert = load_dataset(expert_dir);
    const double horizon = expert.front().horizon;

    std::vector<EventSequence> generated;
    const std::string kind = checkpoint_kind(model_path);
    if (kind == "generator") {
        const GeneratorCheckpoint ck = load_generator_checkpoint(model_path);
        generated = roll_many(ck.params, expert, horizon, rollouts, common.seed);
    } else if (kind == "baseline") {
        const BaselineCheckpoint ck = load_baseline_checkpoint(model_path);
        const StaticFeatures none = StaticFeatures::Zero(0);
        for (int m = 0; m < rollouts; ++m) {
            generated.push_back(
                sample_baseline(ck.params, none, horizon,
                                derive_seed(common.seed, 0x9e4e, static_cast<std::uint64_t>(m))));
        }
    } else if (kind == "selfexciting") {
        const TriggeringModel model = load_triggering_model(model_path);
        generated =
            simulate_many(model, rollouts, derive_seed(common.seed, 0x9e4e), common.threads());
    } else {
        throw std::invalid_argument("unsupported model kind '" + kind + "' for eval");
    }

    EvalConfig ec;
    ec.kernel = parse_kernel(cfg_get(cfg, "kernel", "kind", kernel_kind),
                             cfg_get(cfg, "kernel", "bandwidth", bandwidth));
    ec.batch = cfg_get(cfg, "eval", "batch", batch);
    ec.resamples = cfg_get(cfg, "eval", "resamples", resamples);
    ec.time_bins = cfg_get(cfg, "eval", "time_bins", time_bins);
    ec.space_bins = cfg_get(cfg, "eval", "space_bins", space_bins);
    if (region_bounds.size() != 4) throw std::invalid_argument("--region needs four numbers");
    ec.region.min = {region_bounds[0], region_bounds[2]};
    ec.region.max = {region_bounds[1], region_bounds[3]};
    ec.seed = common.seed;

    const EvalMetrics metrics = evaluate_generated(expert, generated, ec);
    const fs::path out(common.out_dir);
    fs::create_directories(out);
    {
        std::ofstream mf(out / "metrics.json");
        mf << eval_metrics_to_json(metrics) << '\n';
    }

    json resolved;
    resolved["expert"] = expert_dir;
    resolved["model"] = model_path;
    resolved["rollouts"] = rollouts;
    resolved["batch"] = ec.batch;
    resolved["resamples"] = ec.resamples;
    resolved["time_bins"] = ec.time_bins;
    resolved["space_bins"] = ec.space_bins;
    resolved["region"] = region_bounds;
    resolved["bandwidth"] = ec.kernel.bandwidth;
    resolved["seed"] = common.seed;
    write_snapshot(out, "eval", resolved);

    std::cout << "d2 " << metrics.d2 << " floor " << metrics.self_discrepancy << " ratio "
              << metrics.d2_ratio << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"intensity-free spatio-temporal event generator toolkit"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    CommonOpts common;
    // --config is pre-scanned so file values become flag defaults
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") common.config_path = argv[i + 1];
    }

    json cfg;
    try {
        cfg = config_or_empty(common.config_path);
        common.seed = cfg.value("seed", 0ull);
    } catch (const std::exception& ex) {
        json err{{"error", ex.what()}, {"version", kVersion}};
        std::cerr << err.dump() << "\n";
        return 1;
    }

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "JSON config file");
        sub->add_option("--out", common.out_dir, "output directory")->required();
        sub->add_option("--seed", common.seed, "global seed");
        sub->add_flag("--serial", common.serial, "single-threaded deterministic execution");
    };

    // simulate
    int sim_count = 100;
    double sim_horizon = 2.0, sim_base = 1.0, sim_a0 = 0.3, sim_omega = 5.0, sim_sigma = 0.15;
    std::vector<double> region{-2.0, 2.0, -2.0, 2.0};
    std::string grid_file;
    CLI::App* sim = app.add_subcommand("simulate", "sample a ground-truth self-exciting process");
    add_common(sim);
    sim->add_option("--count", sim_count, "number of sequences");
    sim->add_option("--horizon", sim_horizon, "time horizon");
    sim->add_option("--base-rate", sim_base, "constant exogenous rate (events/time/area)");
    sim->add_option("--a0", sim_a0, "branching ratio (< 1)");
    sim->add_option("--omega", sim_omega, "temporal decay");
    sim->add_option("--sigma", sim_sigma, "spatial kernel standard deviation");
    sim->add_option("--region", region, "xmin xmax ymin ymax")->expected(4);
    sim->add_option("--base-grid", grid_file, "JSON file with a tabulated base rate");

    // train
    std::string train_data, train_mode = "lstm", train_scaling, train_schema,
                            train_optimizer = "adam", train_init;
    int train_iters = 1000, train_be = 32, train_bl = 32, train_hidden = 64, train_mlp = 32,
        train_noise = 10, train_unit = 1;
    double train_lr = 1e-3, train_bw = 1.0, train_clip = 5.0;
    bool train_unbiased = false;
    std::string train_kernel = "gaussian";
    CLI::App* tr = app.add_subcommand("train", "fit the generator by discrepancy minimization");
    add_common(tr);
    tr->add_option("--data", train_data, "directory of expert event CSVs")->required();
    tr->add_option("--mode", train_mode, "recurrent mode: lstm or rnn");
    tr->add_option("--iterations", train_iters, "gradient steps");
    tr->add_option("--learning-rate", train_lr, "Adam learning rate");
    tr->add_option("--batch-expert", train_be, "expert sequences per step (L)");
    tr->add_option("--batch-learner", train_bl, "rollouts per step (M)");
    tr->add_option("--hidden", train_hidden, "recurrent state size");
    tr->add_option("--mlp-hidden", train_mlp, "emission MLP hidden size");
    tr->add_option("--noise-dim", train_noise, "noise vector length");
    tr->add_option("--bandwidth", train_bw, "kernel bandwidth");
    tr->add_option("--kernel", train_kernel, "kernel kind");
    tr->add_option("--scaling", train_scaling, "scaling JSON to embed in the checkpoint");
    tr->add_option("--feature-schema", train_schema, "comma-separated feature names");
    tr->add_option("--event-unit", train_unit, "cases represented by one event");
    tr->add_option("--optimizer", train_optimizer, "adam or sgd");
    tr->add_flag("--unbiased", train_unbiased, "use the unbiased discrepancy estimator");
    tr->add_option("--clip-norm", train_clip, "global gradient norm clip (<=0 disables)");
    tr->add_option("--init-checkpoint", train_init, "warm-start checkpoint");

    // fit-baseline
    std::string fb_data, fb_mode = "lstm", fb_scaling;
    int fb_hidden = 64, fb_iters = 500, fb_batch = 32;
    double fb_lr = 1e-3;
    CLI::App* fb = app.add_subcommand("fit-baseline", "fit the likelihood baseline");
    add_common(fb);
    fb->add_option("--data", fb_data, "directory of event CSVs")->required();
    fb->add_option("--mode", fb_mode, "recurrent mode: lstm or rnn");
    fb->add_option("--hidden", fb_hidden, "recurrent state size");
    fb->add_option("--iterations", fb_iters, "gradient steps");
    fb->add_option("--learning-rate", fb_lr, "Adam learning rate");
    fb->add_option("--batch", fb_batch, "sequences per step");
    fb->add_option("--scaling", fb_scaling, "scaling JSON to embed in the checkpoint");

    // sample-baseline
    std::string sb_checkpoint;
    int sb_count = 32;
    double sb_horizon = 2.0;
    CLI::App* sb = app.add_subcommand("sample-baseline", "sample sequences from a fitted baseline");
    add_common(sb);
    sb->add_option("--checkpoint", sb_checkpoint, "baseline checkpoint")->required();
    sb->add_option("--count", sb_count, "number of sequences");
    sb->add_option("--horizon", sb_horizon, "time horizon");

    // generate
    std::string gen_checkpoint, gen_feature;
    int gen_count = 32;
    double gen_horizon = 2.0;
    bool gen_raw = false;
    CLI::App* gen = app.add_subcommand("generate", "free-running rollouts from a checkpoint");
    add_common(gen);
    gen->add_option("--checkpoint", gen_checkpoint, "generator checkpoint")->required();
    gen->add_option("--count", gen_count, "number of sequences");
    gen->add_option("--horizon", gen_horizon, "time horizon (scaled units)");
    gen->add_option("--feature", gen_feature, "comma-separated feature values");
    gen->add_flag("--raw", gen_raw, "emit raw coordinates via the stored scaling");

    // predict
    std::string pred_checkpoint, pred_history, pred_feature;
    int pred_n = 10;
    bool pred_raw = false;
    CLI::App* pred = app.add_subcommand("predict", "condition on a history and predict new events");
    add_common(pred);
    pred->add_option("--checkpoint", pred_checkpoint, "generator checkpoint")->required();
    pred->add_option("--history", pred_history, "history event CSV")->required();
    pred->add_option("--n-events", pred_n, "events to predict");
    pred->add_option("--feature", pred_feature, "comma-separated feature values");
    pred->add_flag("--raw", pred_raw, "emit raw coordinates via the stored scaling");

    // reward-field
    std::string rf_expert, rf_learner, rf_kernel = "gaussian";
    double rf_bw = 1.0, rf_t = 1.0, rf_x = 0.0, rf_y = 0.0;
    int rf_grid = 40;
    std::vector<double> rf_region{-2.0, 2.0, -2.0, 2.0};
    CLI::App* rf = app.add_subcommand("reward-field", "dump the nonparametric reward on slices");
    add_common(rf);
    rf->add_option("--expert", rf_expert, "directory of expert event CSVs")->required();
    rf->add_option("--learner", rf_learner, "directory of generated event CSVs")->required();
    rf->add_option("--bandwidth", rf_bw, "kernel bandwidth");
    rf->add_option("--kernel", rf_kernel, "kernel kind");
    rf->add_option("--grid", rf_grid, "grid resolution per axis");
    rf->add_option("--slice-t", rf_t, "time of the fixed-t spatial slice");
    rf->add_option("--slice-x", rf_x, "x of the fixed-location time slice");
    rf->add_option("--slice-y", rf_y, "y of the fixed-location time slice");
    rf->add_option("--region", rf_region, "xmin xmax ymin ymax")->expected(4);

    // covid-ingest
    std::string ci_counties;
    CLI::App* ci =
        app.add_subcommand("covid-ingest", "build grouped training data from county counts");
    add_common(ci);
    ci->add_option("--counties", ci_counties, "wide county CSV")->required();

    // covid-scenario
    std::string cs_checkpoint, cs_counties, cs_fips, cs_end, cs_condition;
    int cs_shift = 0, cs_rollouts = 10;
    CLI::App* cs = app.add_subcommand("covid-scenario", "lockdown-shift what-if rollouts");
    add_common(cs);
    cs->add_option("--checkpoint", cs_checkpoint, "generator checkpoint")->required();
    cs->add_option("--counties", cs_counties, "wide county CSV")->required();
    cs->add_option("--county", cs_fips, "county fips id")->required();
    cs->add_option("--shift-days", cs_shift, "lockdown shift in days");
    cs->add_option("--rollouts", cs_rollouts, "rollouts per scenario (R)");
    cs->add_option("--end-date", cs_end, "target end date YYYY-MM-DD")->required();
    cs->add_option("--condition-until", cs_condition, "feed observed events before this date");

    // eval
    std::string ev_expert, ev_model, ev_kernel = "gaussian";
    int ev_rollouts = 64, ev_batch = 64, ev_resamples = 20, ev_tbins = 10, ev_sbins = 10;
    double ev_bw = 1.0;
    std::vector<double> ev_region{-2.0, 2.0, -2.0, 2.0};
    CLI::App* ev = app.add_subcommand("eval", "score a model against held-out expert data");
    add_common(ev);
    ev->add_option("--expert", ev_expert, "directory of held-out expert CSVs")->required();
    ev->add_option("--model", ev_model, "generator/baseline checkpoint or ground-truth JSON")
        ->required();
    ev->add_option("--rollouts", ev_rollouts, "generated sequences");
    ev->add_option("--batch", ev_batch, "discrepancy batch size");
    ev->add_option("--resamples", ev_resamples, "discrepancy resampling rounds");
    ev->add_option("--time-bins", ev_tbins, "intensity grid time bins");
    ev->add_option("--space-bins", ev_sbins, "intensity grid bins per spatial axis");
    ev->add_option("--bandwidth", ev_bw, "kernel bandwidth");
    ev->add_option("--kernel", ev_kernel, "kernel kind");
    ev->add_option("--region", ev_region, "xmin xmax ymin ymax")->expected(4);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& ex) {
        if (ex.get_exit_code() != 0) {
            json err{{"error", ex.what()}, {"version", kVersion}};
            std::cerr << err.dump() << "\n";
        }
        return app.exit(ex);
    }

    try {
        if (sim->parsed()) {
            return run_simulate(common, cfg, sim_count, sim_horizon, sim_base, sim_a0, sim_omega,
                                sim_sigma, region, grid_file);
        }
        if (tr->parsed()) {
            return run_train(common, cfg, train_data, train_mode, train_iters, train_lr, train_be,
                             train_bl, train_hidden, train_mlp, train_noise, train_bw,
                             train_kernel, train_scaling, train_schema, train_unit,
                             train_optimizer, train_unbiased, train_clip, train_init);
        }
        if (fb->parsed()) {
            return run_fit_baseline(common, cfg, fb_data, fb_mode, fb_hidden, fb_iters, fb_lr,
                                    fb_batch, fb_scaling);
        }
        if (sb->parsed()) {
            const BaselineCheckpoint ck = load_baseline_checkpoint(sb_checkpoint);
            std::vector<EventSequence> sequences;
            const StaticFeatures none = StaticFeatures::Zero(0);
            for (int m = 0; m < sb_count; ++m) {
                sequences.push_back(sample_baseline(
                    ck.params, none, sb_horizon,
                    derive_seed(common.seed, 0x9e4e, static_cast<std::uint64_t>(m))));
            }
            save_dataset(fs::path(common.out_dir) / "sequences", sequences, "base_");
            json resolved{{"checkpoint", sb_checkpoint},
                          {"count", sb_count},
                          {"horizon", sb_horizon},
                          {"seed", common.seed}};
            write_snapshot(common.out_dir, "sample-baseline", resolved);
            std::cout << "sampled " << sb_count << " sequences\n";
            return 0;
        }
        if (gen->parsed()) {
            return run_generate(common, gen_checkpoint, gen_count, gen_horizon, gen_feature,
                                gen_raw);
        }
        if (pred->parsed()) {
            return run_predict(common, pred_checkpoint, pred_history, pred_n, pred_feature,
                               pred_raw);
        }
        if (rf->parsed()) {
            return run_reward_field(common, cfg, rf_expert, rf_learner, rf_bw, rf_kernel, rf_grid,
                                    rf_t, rf_x, rf_y, rf_region);
        }
        if (ci->parsed()) return run_covid_ingest(common, ci_counties);
        if (cs->parsed()) {
            return run_covid_scenario(common, cs_checkpoint, cs_counties, cs_fips, cs_shift,
                                      cs_rollouts, cs_end, cs_condition);
        }
        if (ev->parsed()) {
            return run_eval(common, cfg, ev_expert, ev_model, ev_rollouts, ev_batch, ev_resamples,
                            ev_bw, ev_kernel, ev_tbins, ev_sbins, ev_region);
        }
    } catch (const std::exception& ex) {
        json err{{"error", ex.what()}, {"version", kVersion}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
