#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <thread>
#include <vector>

#include <json.hpp>

#include "enscert/data.hpp"
#include "enscert/ensemble.hpp"
#include "enscert/format.hpp"
#include "enscert/model.hpp"
#include "enscert/smoothing.hpp"
#include "enscert/statsim.hpp"
#include "enscert/training.hpp"

namespace enscert::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& msg) {
    throw std::runtime_error("config error: " + msg);
}

// Schema guard: every object may only carry known keys.
void expect_keys(const json& obj, const std::string& where,
                 const std::set<std::string>& allowed) {
    if (!obj.is_object()) config_error(where + " must be a JSON object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.count(key)) config_error("unknown key \"" + key + "\" in " + where);
    }
}

json load_config(const GlobalOptions& opts) {
    std::ifstream in(opts.config_path);
    if (!in) config_error("cannot open " + opts.config_path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        config_error(std::string("invalid JSON: ") + e.what());
    }
    return j;
}

fs::path resolve_out_dir(const GlobalOptions& opts, const json& cfg) {
    std::string out;
    if (!opts.out_dir.empty()) {
        out = opts.out_dir;
    } else if (cfg.contains("out")) {
        out = cfg.at("out").get<std::string>();
    } else if (const char* env = std::getenv("ENSCERT_OUT")) {
        out = env;
    } else {
        config_error("no output directory: set \"out\" in the config or pass --out");
    }
    fs::create_directories(out);
    return out;
}

uint64_t resolve_seed(const GlobalOptions& opts, const json& cfg) {
    if (opts.seed) return *opts.seed;
    if (cfg.contains("seed")) return cfg.at("seed").get<uint64_t>();
    return 0;
}

int resolve_jobs(const GlobalOptions& opts, const json& cfg) {
    int jobs = 0;
    if (opts.jobs) {
        jobs = *opts.jobs;
    } else if (cfg.contains("jobs")) {
        jobs = cfg.at("jobs").get<int>();
    }
    if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
    return std::max(jobs, 1);
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

data::Dataset load_dataset(const json& spec, uint64_t fallback_seed) {
    expect_keys(spec, "dataset",
                {"type", "n", "noise_std", "seed", "centers", "per_center", "images",
                 "labels", "max_n", "train_fraction", "stride"});
    const std::string type = spec.at("type").get<std::string>();
    const uint64_t seed =
        spec.contains("seed") ? spec.at("seed").get<uint64_t>() : fallback_seed;
    if (type == "two_moons") {
        return data::gen_two_moons(spec.at("n").get<int>(),
                                   spec.value("noise_std", 0.1), seed);
    }
    if (type == "blobs") {
        std::vector<Vector> centers;
        for (const auto& c : spec.at("centers")) centers.push_back(c.get<Vector>());
        return data::gen_blobs(centers, spec.at("per_center").get<int>(),
                               spec.value("noise_std", 0.3), seed);
    }
    if (type == "idx") {
        data::Dataset ds = data::read_idx(spec.at("images").get<std::string>(),
                                          spec.at("labels").get<std::string>());
        const int64_t max_n = spec.value("max_n", int64_t{0});
        const int stride = spec.value("stride", 1);
        if (max_n > 0 || stride > 1) {
            // Subsample in file order: stride first, then cap.
            data::Dataset out;
            out.dim = ds.dim;
            out.num_classes = ds.num_classes;
            for (size_t i = 0; i < ds.size(); i += stride) {
                if (max_n > 0 && static_cast<int64_t>(out.size()) >= max_n) break;
                out.features.push_back(ds.features[i]);
                out.labels.push_back(ds.labels[i]);
            }
            return out;
        }
        return ds;
    }
    config_error("unknown dataset type \"" + type + "\"");
}

training::TrainingConfig parse_training(const json& spec, uint64_t seed) {
    expect_keys(spec, "training",
                {"variant", "rho1", "rho2", "sigma", "k_noise", "epochs", "batch_size",
                 "lr", "momentum", "lr_decay_period", "lr_decay_factor", "adp_alpha",
                 "adp_beta", "adp_entropy_per_member"});
    training::TrainingConfig cfg;
    cfg.variant = training::variant_from_string(spec.value("variant", std::string("none")));
    cfg.rho1 = spec.value("rho1", 0.0);
    cfg.rho2 = spec.value("rho2", 0.0);
    cfg.sigma = spec.value("sigma", 0.5);
    cfg.k_noise = spec.value("k_noise", 2);
    cfg.epochs = spec.value("epochs", 10);
    cfg.batch_size = spec.value("batch_size", 32);
    cfg.lr = spec.value("lr", 0.01);
    cfg.momentum = spec.value("momentum", 0.9);
    cfg.lr_decay_period = spec.value("lr_decay_period", 0);
    cfg.lr_decay_factor = spec.value("lr_decay_factor", 1.0);
    cfg.adp_alpha = spec.value("adp_alpha", 0.5);
    cfg.adp_beta = spec.value("adp_beta", 0.5);
    cfg.adp_entropy_per_member = spec.value("adp_entropy_per_member", false);
    cfg.seed = seed;
    cfg.validate();
    return cfg;
}

smoothing::SmoothingSpec parse_smoothing(const json& spec) {
    expect_keys(spec, "smoothing", {"sigma", "n0", "n", "alpha", "strategy"});
    smoothing::SmoothingSpec s;
    s.sigma = spec.value("sigma", 0.5);
    s.n0 = spec.value("n0", int64_t{100});
    s.n = spec.value("n", int64_t{10000});
    s.alpha = spec.value("alpha", 0.001);
    s.validate();
    return s;
}

std::vector<model::MlpClassifier> load_checkpoints(const json& cfg) {
    std::vector<std::string> paths;
    if (cfg.contains("checkpoints")) {
        const json& c = cfg.at("checkpoints");
        if (c.is_array()) {
            for (const auto& p : c) paths.push_back(p.get<std::string>());
        } else {
            expect_keys(c, "checkpoints", {"manifest"});
            const fs::path manifest_path = c.at("manifest").get<std::string>();
            std::ifstream in(manifest_path);
            if (!in) config_error("cannot open manifest " + manifest_path.string());
            json manifest;
            in >> manifest;
            for (const auto& p : manifest.at("members")) {
                paths.push_back((manifest_path.parent_path() / p.get<std::string>()).string());
            }
        }
    } else {
        config_error("missing \"checkpoints\"");
    }
    std::vector<model::MlpClassifier> members;
    for (const auto& p : paths) {
        std::ifstream in(p);
        if (!in) config_error("cannot open checkpoint " + p);
        std::stringstream ss;
        ss << in.rdbuf();
        members.push_back(model::MlpClassifier::from_json(ss.str()));
    }
    if (members.empty()) config_error("no checkpoints listed");
    return members;
}

std::vector<double> parse_weights(const json& cfg, size_t n_members) {
    if (cfg.contains("ensemble") && cfg.at("ensemble").contains("weights")) {
        const auto w = cfg.at("ensemble").at("weights").get<std::vector<double>>();
        if (w.size() != n_members) config_error("ensemble.weights size must match members");
        return w;
    }
    return std::vector<double>(n_members, 1.0);
}

struct EvalSelection {
    std::vector<size_t> indices;
};

EvalSelection select_eval_points(const json& cfg, size_t available) {
    int stride = 1;
    int64_t max_points = 0;
    if (cfg.contains("eval")) {
        expect_keys(cfg.at("eval"), "eval", {"stride", "max_points"});
        stride = cfg.at("eval").value("stride", 1);
        max_points = cfg.at("eval").value("max_points", int64_t{0});
    }
    if (stride < 1) config_error("eval.stride must be >= 1");
    EvalSelection sel;
    for (size_t i = 0; i < available; i += stride) {
        if (max_points > 0 && static_cast<int64_t>(sel.indices.size()) >= max_points) break;
        sel.indices.push_back(i);
    }
    if (sel.indices.empty()) config_error("eval selection is empty");
    return sel;
}

std::vector<double> parse_radii_grid(const json& cfg) {
    if (cfg.contains("radii_grid")) return cfg.at("radii_grid").get<std::vector<double>>();
    return {0.0, 0.25, 0.5, 0.75, 1.0};
}

json curve_to_json(const smoothing::AccuracyCurve& curve) {
    json out;
    out["radii"] = curve.radii;
    out["certified_accuracy"] = curve.accuracy;
    out["acr"] = curve.acr;
    return out;
}

}  // namespace

int cmd_train(const GlobalOptions& opts) {
    const json cfg = load_config(opts);
    expect_keys(cfg, "config",
                {"seed", "out", "jobs", "dataset", "model", "ensemble", "training",
                 "init_from"});
    const uint64_t seed = resolve_seed(opts, cfg);
    const fs::path out_dir = resolve_out_dir(opts, cfg);

    const data::Dataset ds = load_dataset(cfg.at("dataset"), seed);
    ds.validate();

    expect_keys(cfg.at("model"), "model", {"hidden", "activation"});
    const auto hidden = cfg.at("model").value("hidden", std::vector<int>{64, 64});
    const auto activation = model::activation_from_string(
        cfg.at("model").value("activation", std::string("softplus")));

    expect_keys(cfg.at("ensemble"), "ensemble", {"n_members", "weights", "protocol"});
    const int n_members = cfg.at("ensemble").value("n_members", 3);
    if (n_members < 1) config_error("ensemble.n_members must be >= 1");

    training::TrainingConfig tcfg = parse_training(cfg.at("training"), seed);

    std::vector<model::MlpClassifier> members;
    if (cfg.contains("init_from")) {
        // Fine-tuning: resume from existing checkpoints instead of random
        // initialization.
        json init;
        init["checkpoints"] = cfg.at("init_from");
        members = load_checkpoints(init);
        if (static_cast<int>(members.size()) != n_members)
            config_error("init_from must supply ensemble.n_members checkpoints");
    } else {
        for (int i = 0; i < n_members; ++i) {
            numstats::RngStream rng = numstats::RngStream(seed, 100).substream(i);
            members.push_back(model::MlpClassifier::init_random(ds.dim, hidden,
                                                                ds.num_classes, rng,
                                                                activation));
        }
    }

    const training::TrainingHistory history = training::train(members, ds, tcfg);

    json manifest;
    manifest["members"] = json::array();
    for (int i = 0; i < n_members; ++i) {
        const std::string name = "member_" + std::to_string(i) + ".json";
        write_file(out_dir / name, members[i].to_json());
        manifest["members"].push_back(name);
    }
    manifest["input_dim"] = ds.dim;
    manifest["num_classes"] = ds.num_classes;
    manifest["seed"] = seed;
    manifest["config"] = cfg;
    write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
    write_file(out_dir / "history.csv", history.to_csv());
    return 0;
}

namespace {

// Fan-out certification across a worker pool; per-input substreams keep the
// result independent of the job count, and records merge in input order.
template <typename CertifyOne>
std::vector<smoothing::CertificationRecord> certify_parallel(size_t count, int jobs,
                                                             CertifyOne&& certify_one) {
    std::vector<smoothing::CertificationRecord> records(count);
    std::vector<std::thread> workers;
    std::atomic<size_t> next{0};
    const int n_workers = std::max(1, std::min<int>(jobs, static_cast<int>(count)));
    for (int w = 0; w < n_workers; ++w) {
        workers.emplace_back([&]() {
            while (true) {
                const size_t i = next.fetch_add(1);
                if (i >= count) return;
                records[i] = certify_one(i);
            }
        });
    }
    for (auto& t : workers) t.join();
    return records;
}

}  // namespace

int cmd_certify(const GlobalOptions& opts) {
    const json cfg = load_config(opts);
    expect_keys(cfg, "config",
                {"seed", "out", "jobs", "checkpoints", "dataset", "eval", "ensemble",
                 "smoothing", "radii_grid"});
    const uint64_t seed = resolve_seed(opts, cfg);
    const fs::path out_dir = resolve_out_dir(opts, cfg);
    const int jobs = resolve_jobs(opts, cfg);

    const auto members = load_checkpoints(cfg);
    const data::Dataset ds = load_dataset(cfg.at("dataset"), seed);
    const EvalSelection sel = select_eval_points(cfg, ds.size());
    const smoothing::SmoothingSpec spec = parse_smoothing(cfg.at("smoothing"));
    const std::string strategy =
        cfg.at("smoothing").value("strategy", std::string("ebs"));

    ensemble::Protocol protocol = ensemble::Protocol::WE;
    if (cfg.contains("ensemble")) {
        expect_keys(cfg.at("ensemble"), "ensemble", {"protocol", "weights", "n_members"});
        protocol = ensemble::protocol_from_string(
            cfg.at("ensemble").value("protocol", std::string("we")));
    }

    std::vector<smoothing::CertificationRecord> records;
    std::string eas_members_csv;
    if (strategy == "ebs") {
        const ensemble::EnsembleSpec ens =
            protocol == ensemble::Protocol::WE
                ? ensemble::EnsembleSpec::we(members, parse_weights(cfg, members.size()))
                : ensemble::EnsembleSpec::mme(members);
        records = certify_parallel(sel.indices.size(), jobs, [&](size_t i) {
            const size_t idx = sel.indices[i];
            numstats::RngStream rng = numstats::RngStream(seed, 7).substream(idx);
            auto rec = smoothing::certify_ebs(ens, spec, ds.features[idx], ds.labels[idx], rng);
            rec.input_id = static_cast<int64_t>(idx);
            return rec;
        });
    } else if (strategy == "eas") {
        std::vector<smoothing::EasCertification> details(sel.indices.size());
        records = certify_parallel(sel.indices.size(), jobs, [&](size_t i) {
            const size_t idx = sel.indices[i];
            numstats::RngStream rng = numstats::RngStream(seed, 7).substream(idx);
            details[i] =
                smoothing::certify_eas(members, spec, ds.features[idx], ds.labels[idx], rng);
            details[i].record.input_id = static_cast<int64_t>(idx);
            return details[i].record;
        });
        std::ostringstream os;
        os << "id,member,signed_radius,raw_radius,selected_member\n";
        for (const auto& d : details) {
            for (size_t m = 0; m < d.signed_radii.size(); ++m) {
                os << d.record.input_id << "," << m << "," << fmt17(d.signed_radii[m]) << ","
                   << fmt17(d.raw_radius) << "," << d.selected_member << "\n";
            }
        }
        eas_members_csv = os.str();
    } else {
        config_error("smoothing.strategy must be \"ebs\" or \"eas\"");
    }

    const auto grid = parse_radii_grid(cfg);
    const auto curve = smoothing::certified_accuracy_curve(records, grid);

    write_file(out_dir / "records.csv", smoothing::records_to_csv(records));
    if (!eas_members_csv.empty()) write_file(out_dir / "eas_members.csv", eas_members_csv);
    json summary = curve_to_json(curve);
    summary["n_records"] = records.size();
    summary["strategy"] = strategy;
    summary["protocol"] = ensemble::to_string(protocol);
    summary["sigma"] = spec.sigma;
    summary["n"] = spec.n;
    summary["n0"] = spec.n0;
    summary["alpha"] = spec.alpha;
    write_file(out_dir / "summary.json", summary.dump(2) + "\n");
    return 0;
}

int cmd_conditions(const GlobalOptions& opts) {
    const json cfg = load_config(opts);
    expect_keys(cfg, "config",
                {"seed", "out", "jobs", "checkpoints", "dataset", "eval", "ensemble",
                 "conditions"});
    const uint64_t seed = resolve_seed(opts, cfg);
    const fs::path out_dir = resolve_out_dir(opts, cfg);

    const auto members = load_checkpoints(cfg);
    const data::Dataset ds = load_dataset(cfg.at("dataset"), seed);
    const EvalSelection sel = select_eval_points(cfg, ds.size());

    expect_keys(cfg.at("conditions"), "conditions",
                {"beta", "r", "delta", "cos_theta", "protocol"});
    const double beta = cfg.at("conditions").at("beta").get<double>();
    const double r = cfg.at("conditions").value("r", 0.25);
    const double delta = cfg.at("conditions").value("delta", 0.1);
    const double cos_theta = cfg.at("conditions").value("cos_theta", 0.5);
    const ensemble::Protocol protocol = ensemble::protocol_from_string(
        cfg.at("conditions").value("protocol", std::string("we")));
    const auto weights = parse_weights(cfg, members.size());

    std::ostringstream out;
    out << "[";
    bool first = true;
    for (size_t idx : sel.indices) {
        const Vector& x0 = ds.features[idx];
        const int label = ds.labels[idx];
        const int pred = protocol == ensemble::Protocol::WE
                             ? ensemble::we_predict(members, weights, x0)
                             : ensemble::mme_predict(members, x0);
        if (!first) out << ",";
        first = false;
        out << "\n{\"id\":" << idx << ",\"label\":" << label << ",\"prediction\":" << pred;
        if (pred == label) {
            const auto eri = ensemble::eri_we(members, weights, x0, label, r);
            out << ",\"eri\":" << eri.to_json();
            const auto verdict =
                protocol == ensemble::Protocol::MME && members.size() == 2
                    ? ensemble::check_mme_robustness(members, x0, label, r, beta)
                    : ensemble::check_we_robustness(members, weights, x0, label, r, beta);
            out << ",\"verdict\":" << verdict.to_json();
            const double max_r =
                ensemble::max_certified_radius_we(members, weights, x0, label, beta);
            out << ",\"max_radius_beta0_form\":" << fmt17(max_r);
            if (members.size() == 2) {
                try {
                    const auto bound = ensemble::ensemble_radius_bound(
                        members, weights, x0, label, r, delta, cos_theta, protocol);
                    out << ",\"pair_radius_bound\":{\"R\":" << fmt17(bound.R)
                        << ",\"C\":" << fmt17(bound.C) << ",\"c\":" << fmt17(bound.c)
                        << ",\"beta_threshold\":" << fmt17(bound.beta_threshold) << "}";
                } catch (const std::domain_error&) {
                    out << ",\"pair_radius_bound\":null";
                }
            }
        } else {
            out << ",\"skipped\":\"prediction differs from label\"";
        }
        out << "}";
    }
    out << "\n]\n";
    write_file(out_dir / "conditions.json", out.str());
    return 0;
}

int cmd_simulate(const GlobalOptions& opts) {
    const json cfg = load_config(opts);
    expect_keys(cfg, "config",
                {"seed", "out", "jobs", "experiment", "transferability", "bound_sweep",
                 "thresholds", "roc"});
    const uint64_t seed = resolve_seed(opts, cfg);
    const fs::path out_dir = resolve_out_dir(opts, cfg);
    const std::string experiment = cfg.at("experiment").get<std::string>();

    if (experiment == "transferability") {
        statsim::TransferabilityConfig tc;
        if (cfg.contains("transferability")) {
            const json& t = cfg.at("transferability");
            expect_keys(t, "transferability",
                        {"lambda2", "lambda1_min", "lambda1_max", "n_members", "trials",
                         "inner_samples", "sigma", "support_min", "support_max"});
            tc.lambda2 = t.value("lambda2", tc.lambda2);
            tc.lambda1_min = t.value("lambda1_min", tc.lambda1_min);
            tc.lambda1_max = t.value("lambda1_max", tc.lambda1_max);
            tc.n_members = t.value("n_members", tc.n_members);
            tc.trials = t.value("trials", tc.trials);
            tc.inner_samples = t.value("inner_samples", tc.inner_samples);
            tc.sigma = t.value("sigma", tc.sigma);
            tc.support_min = t.value("support_min", tc.support_min);
            tc.support_max = t.value("support_max", tc.support_max);
        }
        tc.seed = seed;
        const auto trials = statsim::simulate_transferability(tc);
        write_file(out_dir / "transferability.csv", statsim::transferability_to_csv(trials));
        std::vector<double> ratio, diff;
        for (const auto& t : trials) {
            ratio.push_back(t.lambda_ratio);
            diff.push_back(t.diff);
        }
        json summary;
        summary["trials"] = trials.size();
        summary["n_members"] = tc.n_members;
        summary["spearman_rho"] = statsim::spearman_rho(ratio, diff);
        write_file(out_dir / "transferability_summary.json", summary.dump(2) + "\n");
        return 0;
    }

    if (experiment == "bound_sweep") {
        const json& b = cfg.at("bound_sweep");
        expect_keys(b, "bound_sweep",
                    {"family", "a", "b", "mu", "s", "s_f", "lambda1", "lambda2", "lambda3",
                     "p", "n_min", "n_max", "sigma"});
        statsim::MarginModel m;
        const std::string family = b.value("family", std::string("uniform"));
        m.family = family == "uniform" ? statsim::DistributionFamily::Uniform
                                       : statsim::DistributionFamily::Symmetric;
        m.a = b.value("a", 0.2);
        m.b = b.value("b", 0.3);
        m.mu = b.value("mu", 0.25);
        m.s = b.value("s", 0.05);
        m.s_f = b.value("s_f", 0.02);
        m.lambda1 = b.value("lambda1", 0.29);
        m.lambda2 = b.value("lambda2", 0.31);
        m.lambda3 = b.value("lambda3", 0.30);
        m.p = b.value("p", 0.01);
        const auto rows = statsim::bound_sweep(m, b.value("n_min", 1), b.value("n_max", 100),
                                               b.value("sigma", 1.0));
        write_file(out_dir / "bound_sweep.csv", statsim::bound_sweep_to_csv(rows));
        return 0;
    }

    if (experiment == "thresholds") {
        const json& t = cfg.contains("thresholds") ? cfg.at("thresholds") : json::object();
        expect_keys(t, "thresholds", {"mu_values", "lambda2", "n_members"});
        const auto mus = t.value("mu_values", std::vector<double>{0.7, 0.8, 0.9});
        const double lambda2 = t.value("lambda2", 1.0);
        const int n_members = t.value("n_members", 10);
        std::ostringstream os;
        os << "mu,lambda2,we_higher_threshold,mme_higher_threshold,n_threshold\n";
        for (double mu : mus) {
            statsim::MarginModel m;
            m.family = statsim::DistributionFamily::Uniform;
            m.a = mu - 0.05;
            m.b = mu + 0.05;
            m.lambda1 = lambda2;
            m.lambda2 = lambda2;
            m.lambda3 = lambda2;
            m.n_members = n_members;
            const auto th = statsim::comparison_thresholds(m);
            os << fmt17(mu) << "," << fmt17(lambda2) << "," << fmt17(th.we_higher_threshold)
               << "," << fmt17(th.mme_higher_threshold) << "," << fmt17(th.n_threshold)
               << "\n";
        }
        write_file(out_dir / "thresholds.csv", os.str());
        return 0;
    }

    if (experiment == "roc") {
        // Desk-scale take on the realistic-data comparison: certify WE and
        // MME on the same trained members, score each input by the lambda
        // proxy ratio minus the MME-dominance threshold, label by which
        // protocol certified the larger radius.
        const json& r = cfg.at("roc");
        expect_keys(r, "roc",
                    {"checkpoints", "dataset", "eval", "smoothing", "proxy_samples"});
        const auto members = load_checkpoints(r);
        const data::Dataset ds = load_dataset(r.at("dataset"), seed);
        const EvalSelection sel = select_eval_points(r, ds.size());
        const smoothing::SmoothingSpec spec = parse_smoothing(r.at("smoothing"));
        const int64_t proxy_samples = r.value("proxy_samples", int64_t{400});
        const std::vector<double> weights(members.size(), 1.0);
        const auto we_spec = ensemble::EnsembleSpec::we(members, weights);
        const auto mme_spec = ensemble::EnsembleSpec::mme(members);

        std::vector<double> scores;
        std::vector<uint8_t> labels;
        std::ostringstream os;
        os << "id,lambda1_hat,lambda2_hat,score,radius_we,radius_mme,mme_higher\n";
        for (size_t idx : sel.indices) {
            const Vector& x0 = ds.features[idx];
            const int label = ds.labels[idx];
            numstats::RngStream rng = numstats::RngStream(seed, 11).substream(idx);
            const auto [l1, l2] =
                statsim::lambda_proxies(we_spec, x0, label, spec.sigma, proxy_samples, rng);

            numstats::RngStream rng_we = numstats::RngStream(seed, 12).substream(idx);
            numstats::RngStream rng_mme = numstats::RngStream(seed, 13).substream(idx);
            const auto rec_we = smoothing::certify_ebs(we_spec, spec, x0, label, rng_we);
            const auto rec_mme = smoothing::certify_ebs(mme_spec, spec, x0, label, rng_mme);

            // Threshold score from the estimated moments of the true-class
            // confidences.
            numstats::RngStream rng_m = numstats::RngStream(seed, 14).substream(idx);
            const int64_t m_draws = proxy_samples;
            double sum = 0.0, sq = 0.0, min_sum = 0.0, min_sq = 0.0;
            Vector noisy(x0.size());
            for (int64_t k = 0; k < m_draws; ++k) {
                for (size_t i = 0; i < x0.size(); ++i)
                    noisy[i] = x0[i] + spec.sigma * rng_m.normal();
                double mn = 1e300;
                for (const auto& mem : members) {
                    const double u = mem.confidences(noisy)[label];
                    sum += u;
                    sq += u * u;
                    mn = std::min(mn, u);
                }
                min_sum += mn;
                min_sq += mn * mn;
            }
            const double n_all = static_cast<double>(m_draws * members.size());
            const double mu = sum / n_all;
            const double s = std::sqrt(std::max(sq / n_all - mu * mu, 1e-12));
            const double mu_min = min_sum / m_draws;
            const double s_f =
                std::sqrt(std::max(min_sq / m_draws - mu_min * mu_min, 1e-12));

            double score;
            try {
                statsim::MarginModel mm;
                mm.family = statsim::DistributionFamily::Symmetric;
                mm.mu = mu;
                mm.s = s;
                mm.s_f = std::min(s_f, s * (1.0 - 1e-9));
                mm.lambda1 = std::max(l1, 1e-6);
                mm.lambda2 = std::max(l2, 1e-6);
                mm.lambda3 = std::max(l2, 1e-6);
                mm.n_members = static_cast<int>(members.size());
                const auto th = statsim::comparison_thresholds(mm);
                score = l1 / std::max(l2, 1e-9) - th.mme_higher_threshold;
            } catch (const std::domain_error&) {
                continue;  // moment preconditions unsatisfied at this input
            }
            const bool mme_higher = rec_mme.radius > rec_we.radius;
            if (rec_mme.radius == rec_we.radius) continue;  // undecided pair
            scores.push_back(score);
            labels.push_back(mme_higher ? 1 : 0);
            os << idx << "," << fmt17(l1) << "," << fmt17(l2) << "," << fmt17(score) << ","
               << fmt17(rec_we.radius) << "," << fmt17(rec_mme.radius) << ","
               << (mme_higher ? 1 : 0) << "\n";
        }
        write_file(out_dir / "roc_points.csv", os.str());
        json summary;
        summary["points"] = scores.size();
        bool has_both = false;
        if (!labels.empty()) {
            const uint8_t first = labels.front();
            for (uint8_t b : labels) has_both = has_both || (b != first);
        }
        if (has_both) {
            std::unique_ptr<bool[]> buf(new bool[labels.size()]);
            for (size_t i = 0; i < labels.size(); ++i) buf[i] = labels[i] != 0;
            summary["auc"] =
                statsim::roc_auc(scores, std::span<const bool>(buf.get(), labels.size()));
        } else {
            summary["auc"] = nullptr;
        }
        write_file(out_dir / "roc_summary.json", summary.dump(2) + "\n");
        return 0;
    }

    config_error("unknown experiment \"" + experiment + "\"");
}

int cmd_eval(const GlobalOptions& opts) {
    const json cfg = load_config(opts);
    expect_keys(cfg, "config", {"seed", "out", "jobs", "records", "radii_grid"});
    const fs::path out_dir = resolve_out_dir(opts, cfg);

    const std::string records_path = cfg.at("records").get<std::string>();
    std::ifstream in(records_path);
    if (!in) config_error("cannot open records " + records_path);
    std::stringstream ss;
    ss << in.rdbuf();
    const auto records = smoothing::records_from_csv(ss.str());

    const auto grid = parse_radii_grid(cfg);
    const auto curve = smoothing::certified_accuracy_curve(records, grid);
    json summary = curve_to_json(curve);
    summary["n_records"] = records.size();
    write_file(out_dir / "summary.json", summary.dump(2) + "\n");
    return 0;
}

}  // namespace enscert::cli
