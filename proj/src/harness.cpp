#include "admix/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace admix {

namespace {

std::string basename_no_ext(const std::string& path) {
    size_t slash = path.find_last_of("/\\");
    std::string name = slash == std::string::npos ? path : path.substr(slash + 1);
    size_t dot = name.find_last_of('.');
    if (dot != std::string::npos && dot > 0) name = name.substr(0, dot);
    return name;
}

int pool_threads() {
    if (const char* env = std::getenv("ADMIX_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return std::min(n, 64);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(std::min(hw, 64u)) : 1;
}

}  // namespace

AttackConfig resolve_attack(const std::string& name, AttackConfig base) {
    if (name == "fgsm") {
        base.iters = 1;
        base.alpha = base.epsilon;
        base.mu = 0.0f;
        base.transform = TransformKind::None;
    } else if (name == "ifgsm") {
        base.mu = 0.0f;
        base.transform = TransformKind::None;
    } else if (name == "mifgsm") {
        base.transform = TransformKind::None;
    } else {
        base.transform = transform_from_name(name);
    }
    return base;
}

std::string composed_attack_name(const std::string& name, const AttackConfig& cfg) {
    std::string out = name;
    if (cfg.use_tim && cfg.transform != TransformKind::Tim) out += "-ti";
    if (cfg.use_dim && cfg.transform != TransformKind::Dim) out += "-dim";
    return out;
}

EvalResult evaluate_attack(const RunConfig& run) {
    if (run.surrogate_paths.empty()) throw TensorError("run config names no surrogate");
    if (run.target_paths.empty()) throw TensorError("run config names no target");

    std::vector<Model> surrogates;
    for (const std::string& p : run.surrogate_paths) surrogates.push_back(load_checkpoint(p));
    std::vector<Model> targets;
    for (const std::string& p : run.target_paths) targets.push_back(load_checkpoint(p));
    Dataset ds = load_dataset(run.dataset_path);
    if (ds.size() == 0) throw TensorError("dataset '" + run.dataset_path + "' is empty");

    std::vector<const Model*> sptr;
    for (const Model& m : surrogates) sptr.push_back(&m);
    Ensemble ens = Ensemble::equal(sptr);

    SamplePool pool;
    pool.images = ds.images;
    pool.labels = ds.labels;

    AttackConfig cfg = resolve_attack(run.attack_name, run.attack);
    cfg.validate();

    size_t n = ds.size();
    if (run.image_count > 0) n = std::min(n, run.image_count);

    EvalResult res;
    res.n_images = n;
    res.adversaries.resize(n);
    res.labels.assign(ds.labels.begin(), ds.labels.begin() + static_cast<long>(n));
    std::vector<float> linfs(n, 0.0f);
    std::vector<char> fooled(n, 0);

    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            AttackConfig local = cfg;
            local.seed = Rng::derive(cfg.seed, i).state;
            AdversaryResult adv = run_attack(ens, ds.images[i], ds.labels[i], local, &pool);
            linfs[i] = adv.linf;
            fooled[i] = adv.surrogate_fooled ? 1 : 0;
            res.adversaries[i] = std::move(adv.x_adv);
        }
    };
    int nthreads = std::min<size_t>(static_cast<size_t>(pool_threads()), n);
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int t = 0; t < nthreads; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    for (size_t i = 0; i < n; ++i) {
        res.max_linf = std::max(res.max_linf, linfs[i]);
        res.whitebox_successes += fooled[i] ? 1u : 0u;
    }

    std::string surrogate_name;
    for (size_t i = 0; i < run.surrogate_paths.size(); ++i) {
        if (i) surrogate_name += "+";
        surrogate_name += basename_no_ext(run.surrogate_paths[i]);
    }
    std::string attack_label = composed_attack_name(run.attack_name, cfg);

    for (size_t t = 0; t < targets.size(); ++t) {
        int successes = 0, denom = 0;
        for (size_t i = 0; i < n; ++i) {
            if (run.restrict_to_correct &&
                predict(targets[t], ds.images[i]) != ds.labels[i])
                continue;
            ++denom;
            if (predict(targets[t], res.adversaries[i]) != ds.labels[i]) ++successes;
        }
        ReportRow row;
        row.surrogate = surrogate_name;
        row.target = basename_no_ext(run.target_paths[t]);
        row.attack = attack_label;
        row.n = denom;
        row.success_rate = denom > 0 ? static_cast<float>(successes) / static_cast<float>(denom)
                                     : 0.0f;
        row.is_whitebox = std::find(run.surrogate_paths.begin(), run.surrogate_paths.end(),
                                    run.target_paths[t]) != run.surrogate_paths.end();
        res.rows.push_back(std::move(row));
    }
    return res;
}

std::vector<ReportRow> sweep_ablation(const RunConfig& run, SweepAxis axis,
                                      const std::vector<float>& values) {
    std::vector<ReportRow> rows;
    for (float v : values) {
        RunConfig point = run;
        char tag[64];
        if (axis == SweepAxis::M2) {
            int m2 = static_cast<int>(v);
            if (m2 < 0 || static_cast<float>(m2) != v)
                throw TensorError("m2 sweep values must be non-negative integers");
            std::snprintf(tag, sizeof(tag), "[m2=%d]", m2);
            if (m2 == 0) {
                point.attack_name = "sim";  // admix degenerate form
            } else {
                point.attack_name = "admix";
                point.attack.tcfg.m2 = m2;
            }
        } else {
            if (v < 0.0f || v >= 1.0f) throw TensorError("eta sweep values must lie in [0, 1)");
            std::snprintf(tag, sizeof(tag), "[eta=%.4g]", static_cast<double>(v));
            if (v == 0.0f) {
                point.attack_name = "sim";
            } else {
                point.attack_name = "admix";
                point.attack.tcfg.eta = v;
            }
        }
        EvalResult res = evaluate_attack(point);
        for (ReportRow& row : res.rows) {
            row.attack = composed_attack_name("admix", resolve_attack(run.attack_name, run.attack)) +
                         tag;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

void write_report(const std::vector<ReportRow>& rows, const std::string& format,
                  const std::string& path) {
    std::ofstream os(path);
    if (!os) throw TensorError("cannot open '" + path + "' for writing");
    if (format == "csv") {
        os << "surrogate,target,attack,n,success_rate,is_whitebox\n";
        for (const ReportRow& r : rows) {
            char rate[16];
            std::snprintf(rate, sizeof(rate), "%.4f", static_cast<double>(r.success_rate));
            os << r.surrogate << ',' << r.target << ',' << r.attack << ',' << r.n << ',' << rate
               << ',' << (r.is_whitebox ? "true" : "false") << '\n';
        }
    } else if (format == "json") {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const ReportRow& r : rows) {
            nlohmann::ordered_json j;
            j["surrogate"] = r.surrogate;
            j["target"] = r.target;
            j["attack"] = r.attack;
            j["n"] = r.n;
            j["success_rate"] = r.success_rate;
            j["is_whitebox"] = r.is_whitebox;
            arr.push_back(std::move(j));
        }
        os << arr.dump(2) << '\n';
    } else {
        throw TensorError("unknown report format '" + format + "'");
    }
    if (!os) throw TensorError("write failed for '" + path + "'");
}

std::vector<ReportRow> read_report(const std::string& format, const std::string& path) {
    std::ifstream is(path);
    if (!is) throw TensorError("cannot open '" + path + "'");
    std::vector<ReportRow> rows;
    if (format == "json") {
        nlohmann::json arr = nlohmann::json::parse(is);
        for (const auto& j : arr) {
            ReportRow r;
            r.surrogate = j.at("surrogate").get<std::string>();
            r.target = j.at("target").get<std::string>();
            r.attack = j.at("attack").get<std::string>();
            r.n = j.at("n").get<int>();
            r.success_rate = j.at("success_rate").get<float>();
            r.is_whitebox = j.at("is_whitebox").get<bool>();
            rows.push_back(std::move(r));
        }
    } else if (format == "csv") {
        std::string line;
        if (!std::getline(is, line) || line != "surrogate,target,attack,n,success_rate,is_whitebox")
            throw TensorError("bad CSV header in '" + path + "'");
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            std::istringstream ls(line);
            ReportRow r;
            std::string field;
            std::getline(ls, r.surrogate, ',');
            std::getline(ls, r.target, ',');
            std::getline(ls, r.attack, ',');
            std::getline(ls, field, ',');
            r.n = std::stoi(field);
            std::getline(ls, field, ',');
            r.success_rate = std::stof(field);
            std::getline(ls, field, ',');
            r.is_whitebox = field == "true";
            rows.push_back(std::move(r));
        }
    } else {
        throw TensorError("unknown report format '" + format + "'");
    }
    return rows;
}

}  // namespace admix
