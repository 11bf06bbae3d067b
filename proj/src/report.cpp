#include "elastic/report.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "elastic/logging.hpp"

namespace elastic {

namespace {

using njson = nlohmann::ordered_json;

// Shortest round-trip decimal form; shared by every export so run and
// re-export agree byte-for-byte.
std::string num(double v) { return njson(v).dump(); }

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <typename T>
T get_as(const njson& j, const std::string& path) {
    try {
        return j.get<T>();
    } catch (const njson::exception&) {
        throw ConfigError("config: bad value type for key '" + path + "'");
    }
}

void check_keys(const njson& obj, const std::set<std::string>& allowed,
                const std::string& prefix) {
    for (const auto& item : obj.items())
        if (!allowed.count(item.key()))
            throw ConfigError("config: unknown key '" + prefix + item.key() + "'");
}

TaskSpec parse_task(const njson& j) {
    if (!j.is_object()) throw ConfigError("config: 'task' must be an object");
    TaskSpec task;
    const std::string kind = j.contains("kind") ? get_as<std::string>(j.at("kind"), "task.kind")
                                                : throw ConfigError("config: missing key 'task.kind'");
    if (kind == "planted_low_rank") {
        task.kind = TaskSpec::Kind::PlantedLowRank;
        check_keys(j, {"kind", "dims", "planted_ranks", "noise", "samples", "scale"}, "task.");
        if (!j.contains("dims")) throw ConfigError("config: missing key 'task.dims'");
        if (!j.contains("planted_ranks"))
            throw ConfigError("config: missing key 'task.planted_ranks'");
        task.planted.dims = get_as<std::vector<int>>(j.at("dims"), "task.dims");
        task.planted.planted_ranks =
            get_as<std::vector<int>>(j.at("planted_ranks"), "task.planted_ranks");
        if (j.contains("noise")) task.planted.noise = get_as<double>(j.at("noise"), "task.noise");
        if (j.contains("samples"))
            task.planted.samples = get_as<int>(j.at("samples"), "task.samples");
        if (j.contains("scale")) task.planted.scale = get_as<double>(j.at("scale"), "task.scale");
    } else if (kind == "csv_classification") {
        task.kind = TaskSpec::Kind::CsvClassification;
        check_keys(j, {"kind", "path", "features", "classes", "split", "dims"}, "task.");
        for (const char* req : {"path", "features", "classes"})
            if (!j.contains(req)) throw ConfigError(std::string("config: missing key 'task.") + req + "'");
        task.csv.path = get_as<std::string>(j.at("path"), "task.path");
        task.csv.features = get_as<int>(j.at("features"), "task.features");
        task.csv.classes = get_as<int>(j.at("classes"), "task.classes");
        if (j.contains("split")) task.csv.split = get_as<double>(j.at("split"), "task.split");
        task.csv.dims = j.contains("dims") ? get_as<std::vector<int>>(j.at("dims"), "task.dims")
                                           : std::vector<int>{32, 32};
    } else {
        throw ConfigError("config: task.kind must be 'planted_low_rank' or "
                          "'csv_classification', got '" + kind + "'");
    }
    task.validate();
    return task;
}

}  // namespace

RunConfig parse_config_json(const std::string& text, const std::string& origin) {
    njson j;
    try {
        j = njson::parse(text);
    } catch (const njson::parse_error& e) {
        throw ConfigError("config: " + origin + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: " + origin + ": top level must be an object");

    static const std::set<std::string> allowed = {
        "task",        "method",          "total_steps",   "warmup_steps", "stabilize_steps",
        "adjust_interval", "init_rank",   "k",             "b",            "beta1",
        "beta2",       "ortho_weight",    "learning_rate", "batch_size",   "seed",
        "use_scheduler", "output_dir"};
    check_keys(j, allowed, "");

    RunConfig cfg;
    if (!j.contains("task")) throw ConfigError("config: missing key 'task'");
    cfg.task = parse_task(j.at("task"));

    if (j.contains("method")) {
        const auto m = get_as<std::string>(j.at("method"), "method");
        if (m == "fixed")
            cfg.method = MethodSpec::fixed();
        else if (m == "prune_only")
            cfg.method = MethodSpec::prune_only();
        else if (m == "elastic")
            cfg.method = MethodSpec::elastic();
        else
            throw ConfigError("config: method must be fixed|prune_only|elastic, got '" + m + "'");
    }

    auto& a = cfg.train.alloc;
    a.total_steps = 1500;
    a.t_warmup = 200;
    a.t_stabilize = 300;
    a.adjust_interval = 50;
    a.init_rank = 3;
    a.k = 2;
    a.b = 2;
    if (j.contains("total_steps")) a.total_steps = get_as<int>(j.at("total_steps"), "total_steps");
    if (j.contains("warmup_steps")) a.t_warmup = get_as<int>(j.at("warmup_steps"), "warmup_steps");
    if (j.contains("stabilize_steps"))
        a.t_stabilize = get_as<int>(j.at("stabilize_steps"), "stabilize_steps");
    if (j.contains("adjust_interval"))
        a.adjust_interval = get_as<int>(j.at("adjust_interval"), "adjust_interval");
    if (j.contains("init_rank")) a.init_rank = get_as<int>(j.at("init_rank"), "init_rank");
    if (j.contains("k")) a.k = get_as<int>(j.at("k"), "k");
    if (j.contains("b")) a.b = get_as<int>(j.at("b"), "b");
    if (j.contains("use_scheduler"))
        a.use_scheduler = get_as<bool>(j.at("use_scheduler"), "use_scheduler");
    a.validate();

    if (j.contains("beta1")) cfg.train.beta1 = get_as<double>(j.at("beta1"), "beta1");
    if (j.contains("beta2")) cfg.train.beta2 = get_as<double>(j.at("beta2"), "beta2");
    if (cfg.train.beta1 <= 0 || cfg.train.beta1 >= 1 || cfg.train.beta2 <= 0 ||
        cfg.train.beta2 >= 1)
        throw ConfigError("config: beta1/beta2 must lie in (0, 1)");
    if (j.contains("ortho_weight"))
        cfg.train.ortho_weight = get_as<double>(j.at("ortho_weight"), "ortho_weight");
    if (cfg.train.ortho_weight < 0) throw ConfigError("config: ortho_weight must be >= 0");
    if (j.contains("learning_rate"))
        cfg.train.learning_rate = get_as<double>(j.at("learning_rate"), "learning_rate");
    if (cfg.train.learning_rate <= 0) throw ConfigError("config: learning_rate must be > 0");
    if (j.contains("batch_size")) cfg.train.batch_size = get_as<int>(j.at("batch_size"), "batch_size");
    if (cfg.train.batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
    if (j.contains("seed")) cfg.seed = get_as<std::uint64_t>(j.at("seed"), "seed");
    if (j.contains("output_dir")) cfg.output_dir = get_as<std::string>(j.at("output_dir"), "output_dir");
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_json(ss.str(), path);
}

std::string render_metrics_jsonl(const RunLog& log) {
    std::ostringstream os;
    for (const auto& s : log.steps)
        os << "{\"step\":" << s.step << ",\"task_loss\":" << num(s.task_loss)
           << ",\"reg\":" << num(s.reg_value) << ",\"total_rank\":" << s.total_rank << "}\n";
    return os.str();
}

std::string render_events_jsonl(const RunLog& log) {
    std::ostringstream os;
    for (const auto& e : log.events) {
        os << "{\"step\":" << e.step << ",\"b_t\":" << e.b_t
           << ",\"shrunk\":" << (e.shrunk ? "true" : "false") << ",\"pruned\":[";
        for (std::size_t i = 0; i < e.pruned.size(); ++i) {
            const auto& p = e.pruned[i];
            if (i) os << ",";
            os << "{\"layer\":" << p.layer_id << ",\"matrix\":" << p.matrix_id
               << ",\"rank\":" << p.rank_index << ",\"score\":" << num(p.score) << "}";
        }
        os << "],\"expanded\":[";
        for (std::size_t i = 0; i < e.expanded.size(); ++i) {
            const auto& x = e.expanded[i];
            if (i) os << ",";
            os << "{\"layer\":" << x.layer_id << ",\"matrix\":" << x.matrix_id
               << ",\"rank\":" << x.rank_index << "}";
        }
        os << "]}\n";
    }
    return os.str();
}

std::string render_ranks_csv(const RunLog& log, bool per_event) {
    std::ostringstream os;
    if (per_event) {
        os << "step,layer,matrix,rank\n";
        for (const auto& r : log.rank_history)
            os << r.step << "," << r.layer_id << "," << r.matrix_id << "," << r.rank << "\n";
    } else {
        os << "layer,matrix,rank\n";
        for (const auto& l : log.final_layers)
            os << l.layer_id << "," << l.matrix_id << "," << l.r_active << "\n";
    }
    return os.str();
}

namespace {

void stage_rows(std::ostringstream& os, const std::vector<ImportanceRow>& rows,
                const char* stage, bool with_stage) {
    for (const auto& r : rows) {
        if (with_stage) os << stage << ",";
        os << r.layer_id << "," << r.matrix_id << "," << r.rank_index << "," << num(r.score)
           << "\n";
    }
}

}  // namespace

std::string render_importance_csv(const RunLog& log) {
    std::ostringstream os;
    os << "stage,layer,matrix,rank,score\n";
    stage_rows(os, log.importance_post_warmup, "post_warmup", true);
    stage_rows(os, log.importance_post_adjustment, "post_adjustment", true);
    return os.str();
}

std::string render_importance_stage_csv(const RunLog& log, ImportanceStage stage) {
    const bool warm = stage == ImportanceStage::PostWarmup;
    if (warm && !log.has_post_warmup)
        throw ConfigError("export_importance: run recorded no post_warmup snapshot");
    if (!warm && !log.has_post_adjustment)
        throw ConfigError("export_importance: run recorded no post_adjustment snapshot");
    std::ostringstream os;
    os << "layer,matrix,rank,score\n";
    stage_rows(os, warm ? log.importance_post_warmup : log.importance_post_adjustment, "",
               false);
    return os.str();
}

std::string render_layer_state_csv(const RunLog& log) {
    std::ostringstream os;
    os << "layer,matrix,r_active,lambdas\n";
    for (const auto& l : log.final_layers) {
        os << l.layer_id << "," << l.matrix_id << "," << l.r_active << ",";
        for (std::size_t i = 0; i < l.lambdas.size(); ++i) {
            if (i) os << ";";
            os << num(l.lambdas[i]);
        }
        os << "\n";
    }
    return os.str();
}

std::string runlog_to_json(const RunLog& log) {
    njson j;
    j["method"] = log.method;
    j["seed"] = log.seed;
    j["metric_name"] = log.final_metric.name;
    j["metric_value"] = log.final_metric.value;
    j["steps"] = njson::array();
    for (const auto& s : log.steps)
        j["steps"].push_back({s.step, s.task_loss, s.reg_value, s.total_rank});
    j["events"] = njson::array();
    for (const auto& e : log.events) {
        njson je;
        je["step"] = e.step;
        je["b_t"] = e.b_t;
        je["shrunk"] = e.shrunk;
        je["pruned"] = njson::array();
        for (const auto& p : e.pruned)
            je["pruned"].push_back({p.layer_id, p.matrix_id, p.rank_index, p.score});
        je["expanded"] = njson::array();
        for (const auto& x : e.expanded)
            je["expanded"].push_back({x.layer_id, x.matrix_id, x.rank_index});
        j["events"].push_back(std::move(je));
    }
    j["rank_history"] = njson::array();
    for (const auto& r : log.rank_history)
        j["rank_history"].push_back({r.step, r.layer_id, r.matrix_id, r.rank});
    j["final_layers"] = njson::array();
    for (const auto& l : log.final_layers) {
        njson jl;
        jl["layer"] = l.layer_id;
        jl["matrix"] = l.matrix_id;
        jl["r_active"] = l.r_active;
        jl["lambdas"] = l.lambdas;
        j["final_layers"].push_back(std::move(jl));
    }
    j["has_post_warmup"] = log.has_post_warmup;
    j["importance_post_warmup"] = njson::array();
    for (const auto& r : log.importance_post_warmup)
        j["importance_post_warmup"].push_back({r.layer_id, r.matrix_id, r.rank_index, r.score});
    j["has_post_adjustment"] = log.has_post_adjustment;
    j["importance_post_adjustment"] = njson::array();
    for (const auto& r : log.importance_post_adjustment)
        j["importance_post_adjustment"].push_back(
            {r.layer_id, r.matrix_id, r.rank_index, r.score});
    return j.dump(2) + "\n";
}

RunLog runlog_from_json(const std::string& text) {
    njson j;
    try {
        j = njson::parse(text);
    } catch (const njson::parse_error& e) {
        throw ConfigError(std::string("runlog: JSON parse error: ") + e.what());
    }
    RunLog log;
    log.method = j.at("method").get<std::string>();
    log.seed = j.at("seed").get<std::uint64_t>();
    log.final_metric.name = j.at("metric_name").get<std::string>();
    log.final_metric.value = j.at("metric_value").get<double>();
    for (const auto& s : j.at("steps"))
        log.steps.push_back({s.at(0).get<int>(), s.at(1).get<double>(), s.at(2).get<double>(),
                             s.at(3).get<int>()});
    for (const auto& je : j.at("events")) {
        AdjustmentEvent e;
        e.step = je.at("step").get<int>();
        e.b_t = je.at("b_t").get<int>();
        e.shrunk = je.at("shrunk").get<bool>();
        for (const auto& p : je.at("pruned"))
            e.pruned.push_back({p.at(0).get<int>(), p.at(1).get<int>(), p.at(2).get<int>(),
                                p.at(3).get<double>()});
        for (const auto& x : je.at("expanded"))
            e.expanded.push_back({x.at(0).get<int>(), x.at(1).get<int>(), x.at(2).get<int>()});
        log.events.push_back(std::move(e));
    }
    for (const auto& r : j.at("rank_history"))
        log.rank_history.push_back(
            {r.at(0).get<int>(), r.at(1).get<int>(), r.at(2).get<int>(), r.at(3).get<int>()});
    for (const auto& jl : j.at("final_layers")) {
        LayerStateRecord l;
        l.layer_id = jl.at("layer").get<int>();
        l.matrix_id = jl.at("matrix").get<int>();
        l.r_active = jl.at("r_active").get<int>();
        l.lambdas = jl.at("lambdas").get<std::vector<double>>();
        log.final_layers.push_back(std::move(l));
    }
    log.has_post_warmup = j.at("has_post_warmup").get<bool>();
    for (const auto& r : j.at("importance_post_warmup"))
        log.importance_post_warmup.push_back(
            {r.at(0).get<int>(), r.at(1).get<int>(), r.at(2).get<int>(), r.at(3).get<double>()});
    log.has_post_adjustment = j.at("has_post_adjustment").get<bool>();
    for (const auto& r : j.at("importance_post_adjustment"))
        log.importance_post_adjustment.push_back(
            {r.at(0).get<int>(), r.at(1).get<int>(), r.at(2).get<int>(), r.at(3).get<double>()});
    return log;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write file: " + path.string());
    out << content;
}

}  // namespace

void write_run_artifacts(const RunLog& log, const std::string& dir, bool per_event) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path base(dir);
    write_file(base / "metrics.jsonl", render_metrics_jsonl(log));
    write_file(base / "events.jsonl", render_events_jsonl(log));
    write_file(base / "ranks.csv", render_ranks_csv(log, per_event));
    write_file(base / "importance.csv", render_importance_csv(log));
    write_file(base / "layer_state.csv", render_layer_state_csv(log));
    write_file(base / "runlog.json", runlog_to_json(log));
}

namespace {

struct CliOptions {
    std::string config_path;
    std::string output_dir;
    std::string input_path;
    std::int64_t seed_override = -1;
    int seeds = 5;
    bool per_event = false;
};

RunConfig load_cli_config(const CliOptions& opt) {
    RunConfig cfg = load_config(opt.config_path);
    if (opt.seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(opt.seed_override);
    if (!opt.output_dir.empty()) cfg.output_dir = opt.output_dir;
    return cfg;
}

int do_run(const CliOptions& opt) {
    RunConfig cfg = load_cli_config(opt);
    try {
        RunLog log = run_experiment(cfg.task, cfg.method, cfg.train, cfg.seed);
        write_run_artifacts(log, cfg.output_dir, opt.per_event);
        log_info("run: wrote artifacts to " + cfg.output_dir);
        return 0;
    } catch (const TrainingAborted& e) {
        std::filesystem::create_directories(cfg.output_dir);
        const auto diag = std::filesystem::path(cfg.output_dir) / "diagnostic.json";
        write_file(diag, e.diagnostic_json + "\n");
        log_error(std::string(e.what()) + "; diagnostic at " + diag.string());
        return 3;
    }
}

std::string table_csv(const std::vector<std::pair<std::string, std::vector<double>>>& rows,
                      const std::string& metric_name) {
    std::ostringstream os;
    os << "variant,metric,seeds,median\n";
    for (const auto& [name, vals] : rows)
        os << name << "," << metric_name << "," << vals.size() << "," << num(median(vals))
           << "\n";
    return os.str();
}

std::string runs_csv(const std::vector<std::tuple<std::string, std::uint64_t, double>>& rows,
                     const std::string& metric_name) {
    std::ostringstream os;
    os << "variant,seed,metric,value\n";
    for (const auto& [name, seed, v] : rows)
        os << name << "," << seed << "," << metric_name << "," << num(v) << "\n";
    return os.str();
}

int do_compare(const CliOptions& opt) {
    RunConfig cfg = load_cli_config(opt);
    std::vector<std::pair<std::string, std::vector<double>>> table;
    std::vector<std::tuple<std::string, std::uint64_t, double>> detail;
    std::string metric_name;
    for (const MethodSpec& method :
         {MethodSpec::fixed(), MethodSpec::prune_only(), MethodSpec::elastic()}) {
        std::vector<double> vals;
        for (int s = 0; s < opt.seeds; ++s) {
            const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(s);
            RunLog log = run_experiment(cfg.task, method, cfg.train, seed);
            vals.push_back(log.final_metric.value);
            metric_name = log.final_metric.name;
            detail.emplace_back(method.name(), seed, log.final_metric.value);
        }
        table.emplace_back(method.name(), std::move(vals));
    }
    std::filesystem::create_directories(cfg.output_dir);
    write_file(std::filesystem::path(cfg.output_dir) / "compare.csv",
               table_csv(table, metric_name));
    write_file(std::filesystem::path(cfg.output_dir) / "compare_runs.csv",
               runs_csv(detail, metric_name));
    log_info("compare: wrote compare.csv to " + cfg.output_dir);
    return 0;
}

int do_ablate(const CliOptions& opt) {
    RunConfig cfg = load_cli_config(opt);
    std::vector<std::pair<std::string, std::vector<double>>> table;
    std::vector<std::tuple<std::string, std::uint64_t, double>> detail;
    std::string metric_name;
    for (const bool scheduler : {true, false}) {
        TrainConfig tc = cfg.train;
        tc.alloc.use_scheduler = scheduler;
        std::vector<double> vals;
        const std::string name = scheduler ? "scheduler_on" : "scheduler_off";
        for (int s = 0; s < opt.seeds; ++s) {
            const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(s);
            RunLog log = run_experiment(cfg.task, MethodSpec::elastic(), tc, seed);
            vals.push_back(log.final_metric.value);
            metric_name = log.final_metric.name;
            detail.emplace_back(name, seed, log.final_metric.value);
        }
        table.emplace_back(name, std::move(vals));
    }
    std::filesystem::create_directories(cfg.output_dir);
    write_file(std::filesystem::path(cfg.output_dir) / "ablation.csv",
               table_csv(table, metric_name));
    write_file(std::filesystem::path(cfg.output_dir) / "ablation_runs.csv",
               runs_csv(detail, metric_name));
    log_info("ablate-scheduler: wrote ablation.csv to " + cfg.output_dir);
    return 0;
}

int do_probe(const CliOptions& opt) {
    RunConfig cfg = load_cli_config(opt);
    std::vector<std::pair<std::string, std::vector<double>>> table{
        {"full", {}}, {"drop_top", {}}, {"drop_bottom", {}}, {"only_top", {}}};
    std::vector<std::tuple<std::string, std::uint64_t, double>> detail;
    std::string metric_name;
    for (int s = 0; s < opt.seeds; ++s) {
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(s);
        RunLog full = run_experiment(cfg.task, MethodSpec::elastic(), cfg.train, seed);
        metric_name = full.final_metric.name;
        table[0].second.push_back(full.final_metric.value);
        detail.emplace_back("full", seed, full.final_metric.value);
        const std::pair<std::string, ProbeVariant> variants[] = {
            {"drop_top", ProbeVariant::DropTopGroup},
            {"drop_bottom", ProbeVariant::DropBottomGroup},
            {"only_top", ProbeVariant::OnlyTopGroup}};
        for (std::size_t vi = 0; vi < 3; ++vi) {
            RunLog vlog =
                rank_distribution_probe(full, cfg.task, cfg.train, seed, variants[vi].second);
            table[vi + 1].second.push_back(vlog.final_metric.value);
            detail.emplace_back(variants[vi].first, seed, vlog.final_metric.value);
        }
    }
    std::filesystem::create_directories(cfg.output_dir);
    write_file(std::filesystem::path(cfg.output_dir) / "probe.csv",
               table_csv(table, metric_name));
    write_file(std::filesystem::path(cfg.output_dir) / "probe_runs.csv",
               runs_csv(detail, metric_name));
    log_info("probe-ranks: wrote probe.csv to " + cfg.output_dir);
    return 0;
}

int do_export(const CliOptions& opt) {
    std::filesystem::path in(opt.input_path);
    if (std::filesystem::is_directory(in)) in /= "runlog.json";
    std::ifstream f(in);
    if (!f) throw ConfigError("export: cannot open runlog: " + in.string());
    std::stringstream ss;
    ss << f.rdbuf();
    RunLog log = runlog_from_json(ss.str());
    const std::string out = opt.output_dir.empty() ? in.parent_path().string() : opt.output_dir;
    write_run_artifacts(log, out, opt.per_event);
    log_info("export: re-rendered artifacts to " + out);
    return 0;
}

}  // namespace

int cli_run(int argc, const char* const* argv) {
    CLI::App app{"elastic low-rank adaptation experiment driver"};
    app.require_subcommand(1);

    CliOptions opt;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* c = sub->add_option("--config", opt.config_path, "JSON config file");
        if (needs_config) c->required();
        sub->add_option("--seed", opt.seed_override, "seed override");
        sub->add_option("--output-dir", opt.output_dir, "output directory override");
        sub->add_flag("--per-event", opt.per_event, "long-form ranks.csv with a step column");
    };

    auto* run = app.add_subcommand("run", "execute one configured run");
    add_common(run, true);
    auto* compare = app.add_subcommand("compare", "fixed vs prune-only vs elastic");
    add_common(compare, true);
    compare->add_option("--seeds", opt.seeds, "replications");
    auto* ablate = app.add_subcommand("ablate-scheduler", "elastic with scheduler on/off");
    add_common(ablate, true);
    ablate->add_option("--seeds", opt.seeds, "replications");
    auto* probe = app.add_subcommand("probe-ranks", "rank-distribution ablation reruns");
    add_common(probe, true);
    probe->add_option("--seeds", opt.seeds, "replications");
    auto* exp = app.add_subcommand("export", "re-render artifacts from a saved runlog");
    exp->add_option("--input", opt.input_path, "runlog.json or run directory")->required();
    exp->add_option("--output-dir", opt.output_dir, "output directory override");
    exp->add_flag("--per-event", opt.per_event, "long-form ranks.csv with a step column");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (run->parsed()) return do_run(opt);
        if (compare->parsed()) return do_compare(opt);
        if (ablate->parsed()) return do_ablate(opt);
        if (probe->parsed()) return do_probe(opt);
        if (exp->parsed()) return do_export(opt);
        return 2;
    } catch (const ConfigError& e) {
        log_error(e.what());
        return 2;
    } catch (const CsvError& e) {
        log_error(e.what());
        return 2;
    } catch (const TrainingAborted& e) {
        log_error(e.what());
        return 3;
    } catch (const std::exception& e) {
        log_error(e.what());
        return 3;
    }
}

}  // namespace elastic
