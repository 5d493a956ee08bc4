#include "raterfuse/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

#include <fmt/format.h>
#include <json.hpp>

#include "raterfuse/csv.hpp"
#include "raterfuse/errors.hpp"
#include "raterfuse/rng.hpp"

namespace raterfuse {

namespace {

constexpr int kModelFormatVersion = 1;

double clamp_probability(double p) { return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp); }

struct Activations {
    std::vector<double> hidden;  // tanh outputs
    std::vector<double> prob;
};

void forward(const ModelSpec& m, std::span<const double> x, Activations& a) {
    const std::size_t in = m.input_dim;
    std::span<const double> feed = x;
    if (m.hidden_dim) {
        a.hidden.assign(m.hidden_dim, 0.0);
        for (std::size_t h = 0; h < m.hidden_dim; ++h) {
            double z = m.hidden_b[h];
            const double* w = &m.hidden_w[h * in];
            for (std::size_t i = 0; i < in; ++i) z += w[i] * x[i];
            a.hidden[h] = std::tanh(z);
        }
        feed = a.hidden;
    }
    const std::size_t fan = m.fan_in_out();
    a.prob.assign(m.outputs, 0.0);
    for (std::size_t o = 0; o < m.outputs; ++o) {
        double z = m.out_b[o];
        const double* w = &m.out_w[o * fan];
        for (std::size_t i = 0; i < fan; ++i) z += w[i] * feed[i];
        a.prob[o] = sigmoid(z);
    }
}

std::size_t masked_count(const Sample& s) {
    return static_cast<std::size_t>(std::count_if(s.mask.begin(), s.mask.end(), [](std::uint8_t v) { return v != 0; }));
}

void check_sample(const ModelSpec& m, const Sample& s) {
    if (s.x.size() != m.input_dim)
        throw Error(fmt::format("input has dimension {}, model expects {}", s.x.size(), m.input_dim));
    if (s.y.size() != m.outputs || s.mask.size() != m.outputs)
        throw Error(fmt::format("target has {} outputs, model has {}", s.y.size(), m.outputs));
}

}  // namespace

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double soft_bce(double p, double y) {
    p = clamp_probability(p);
    return -(y * std::log(p) + (1.0 - y) * std::log1p(-p));
}

double soft_bce_derivative(double p, double y) {
    p = clamp_probability(p);
    return (p - y) / (p * (1.0 - p));
}

ModelSpec ModelSpec::zeros(std::size_t input_dim, std::size_t hidden_dim, std::size_t outputs) {
    ModelSpec m;
    m.input_dim = input_dim;
    m.hidden_dim = hidden_dim;
    m.outputs = outputs;
    m.hidden_w.assign(hidden_dim * input_dim, 0.0);
    m.hidden_b.assign(hidden_dim, 0.0);
    m.out_w.assign(outputs * m.fan_in_out(), 0.0);
    m.out_b.assign(outputs, 0.0);
    return m;
}

ModelSpec ModelSpec::random(std::size_t input_dim, std::size_t hidden_dim, std::size_t outputs, std::uint64_t seed,
                            double scale) {
    ModelSpec m = zeros(input_dim, hidden_dim, outputs);
    if (scale == 0.0) return m;
    Rng rng(mix_seed(seed, 0x1417));
    const double hs = scale / std::sqrt(static_cast<double>(std::max<std::size_t>(input_dim, 1)));
    for (auto& w : m.hidden_w) w = hs * rng.normal();
    const double os = scale / std::sqrt(static_cast<double>(std::max<std::size_t>(m.fan_in_out(), 1)));
    for (auto& w : m.out_w) w = os * rng.normal();
    return m;
}

std::size_t ModelSpec::parameter_count() const {
    return hidden_w.size() + hidden_b.size() + out_w.size() + out_b.size();
}

double& ModelSpec::parameter(std::size_t i) {
    if (i < hidden_w.size()) return hidden_w[i];
    i -= hidden_w.size();
    if (i < hidden_b.size()) return hidden_b[i];
    i -= hidden_b.size();
    if (i < out_w.size()) return out_w[i];
    i -= out_w.size();
    return out_b.at(i);
}

double ModelSpec::parameter(std::size_t i) const { return const_cast<ModelSpec*>(this)->parameter(i); }

void ModelSpec::check() const {
    if (input_dim == 0 || outputs == 0) throw Error("model needs input_dim > 0 and outputs > 0");
    if (hidden_w.size() != hidden_dim * input_dim || hidden_b.size() != hidden_dim ||
        out_w.size() != outputs * fan_in_out() || out_b.size() != outputs)
        throw Error(fmt::format("model weight shapes do not match dims (in {}, hidden {}, out {})", input_dim,
                                hidden_dim, outputs));
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate", "must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
    if (patience < 1) throw ConfigError("patience", "must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs", "must be >= 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1", "must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2", "must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon", "must be > 0");
    if (!(init_scale >= 0.0)) throw ConfigError("init_scale", "must be >= 0");
    if (!(min_delta >= 0.0)) throw ConfigError("min_delta", "must be >= 0");
}

std::vector<std::vector<double>> predict(const ModelSpec& model, std::span<const std::vector<double>> inputs) {
    model.check();
    std::vector<std::vector<double>> out;
    out.reserve(inputs.size());
    Activations a;
    for (const auto& x : inputs) {
        if (x.size() != model.input_dim)
            throw Error(fmt::format("predict: input has dimension {}, model expects {}", x.size(), model.input_dim));
        forward(model, x, a);
        out.push_back(a.prob);
    }
    return out;
}

double mean_loss(const ModelSpec& model, std::span<const Sample> batch) {
    double total = 0.0;
    std::size_t counted = 0;
    Activations a;
    for (const auto& s : batch) {
        check_sample(model, s);
        const std::size_t n = masked_count(s);
        if (n == 0) continue;
        forward(model, s.x, a);
        double l = 0.0;
        for (std::size_t o = 0; o < model.outputs; ++o)
            if (s.mask[o]) l += soft_bce(a.prob[o], s.y[o]);
        total += l / static_cast<double>(n);
        ++counted;
    }
    return counted ? total / static_cast<double>(counted) : 0.0;
}

namespace {

// Batch members are addressed indirectly so the training loop never copies samples.
double batch_loss_and_gradient(const ModelSpec& m, std::span<const Sample* const> batch, std::vector<double>& grad) {
    grad.assign(m.parameter_count(), 0.0);
    const std::size_t off_hb = m.hidden_w.size();
    const std::size_t off_ow = off_hb + m.hidden_b.size();
    const std::size_t off_ob = off_ow + m.out_w.size();
    const std::size_t fan = m.fan_in_out();

    std::size_t counted = 0;
    for (const Sample* s : batch) {
        check_sample(m, *s);
        if (masked_count(*s)) ++counted;
    }
    if (counted == 0) return 0.0;

    double total = 0.0;
    Activations a;
    std::vector<double> dz(m.outputs), dh(m.hidden_dim);
    for (const Sample* sp : batch) {
        const Sample& s = *sp;
        const std::size_t n = masked_count(s);
        if (n == 0) continue;
        forward(m, s.x, a);
        const double w = 1.0 / (static_cast<double>(n) * static_cast<double>(counted));
        double l = 0.0;
        for (std::size_t o = 0; o < m.outputs; ++o) {
            dz[o] = 0.0;
            if (!s.mask[o]) continue;
            const double p = a.prob[o];
            l += soft_bce(p, s.y[o]);
            // Clamped region has zero slope.
            if (p > kProbabilityClamp && p < 1.0 - kProbabilityClamp) dz[o] = (p - s.y[o]) * w;
        }
        total += l / static_cast<double>(n);

        std::span<const double> feed = m.hidden_dim ? std::span<const double>(a.hidden) : std::span<const double>(s.x);
        for (std::size_t o = 0; o < m.outputs; ++o) {
            if (dz[o] == 0.0) continue;
            double* g = &grad[off_ow + o * fan];
            for (std::size_t i = 0; i < fan; ++i) g[i] += dz[o] * feed[i];
            grad[off_ob + o] += dz[o];
        }
        if (m.hidden_dim) {
            for (std::size_t h = 0; h < m.hidden_dim; ++h) {
                double acc = 0.0;
                for (std::size_t o = 0; o < m.outputs; ++o) acc += m.out_w[o * fan + h] * dz[o];
                dh[h] = acc * (1.0 - a.hidden[h] * a.hidden[h]);
            }
            for (std::size_t h = 0; h < m.hidden_dim; ++h) {
                if (dh[h] == 0.0) continue;
                double* g = &grad[h * m.input_dim];
                for (std::size_t i = 0; i < m.input_dim; ++i) g[i] += dh[h] * s.x[i];
                grad[off_hb + h] += dh[h];
            }
        }
    }
    return total / static_cast<double>(counted);
}

}  // namespace

double loss_and_gradient(const ModelSpec& m, std::span<const Sample> batch, std::vector<double>& grad) {
    std::vector<const Sample*> ptrs;
    ptrs.reserve(batch.size());
    for (const auto& s : batch) ptrs.push_back(&s);
    return batch_loss_and_gradient(m, ptrs, grad);
}

GradCheckResult grad_check(const ModelSpec& model, std::span<const Sample> batch, double tolerance, double step) {
    model.check();
    std::vector<double> analytic;
    loss_and_gradient(model, batch, analytic);
    ModelSpec probe = model;
    GradCheckResult r;
    for (std::size_t i = 0; i < probe.parameter_count(); ++i) {
        const double orig = probe.parameter(i);
        probe.parameter(i) = orig + step;
        const double up = mean_loss(probe, batch);
        probe.parameter(i) = orig - step;
        const double down = mean_loss(probe, batch);
        probe.parameter(i) = orig;
        const double numeric = (up - down) / (2.0 * step);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-4});
        const double rel = std::abs(analytic[i] - numeric) / denom;
        if (rel > r.max_relative_error) {
            r.max_relative_error = rel;
            r.worst_parameter = i;
        }
    }
    r.passed = r.max_relative_error < tolerance;
    return r;
}

TrainResult train_samples(ModelSpec model, std::span<const Sample> train, std::span<const Sample> val,
                          const TrainConfig& cfg) {
    cfg.validate();
    if (!model.initialized())
        model = ModelSpec::random(model.input_dim, model.hidden_dim, model.outputs, cfg.seed, cfg.init_scale);
    model.check();
    if (train.empty()) throw Error("train: empty training set");
    for (const auto& s : train) check_sample(model, s);
    for (const auto& s : val) check_sample(model, s);

    const std::size_t n_params = model.parameter_count();
    std::vector<double> m1(n_params, 0.0), m2(n_params, 0.0), grad;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(cfg.seed, 0xBA7C));
    std::vector<const Sample*> batch;
    batch.reserve(cfg.batch_size);

    TrainResult result;
    result.model = model;
    double best = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    std::uint64_t step = 0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0, b = 0; start < order.size(); start += cfg.batch_size, ++b) {
            batch.clear();
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            for (std::size_t i = start; i < stop; ++i) batch.push_back(&train[order[i]]);
            const double loss = batch_loss_and_gradient(model, batch, grad);
            if (!std::isfinite(loss)) throw Error(fmt::format("train: non-finite loss at epoch {}, batch {}", epoch, b));
            epoch_loss += loss * static_cast<double>(batch.size());
            seen += batch.size();

            ++step;
            const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            for (std::size_t i = 0; i < n_params; ++i) {
                m1[i] = cfg.beta1 * m1[i] + (1.0 - cfg.beta1) * grad[i];
                m2[i] = cfg.beta2 * m2[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
                const double mhat = m1[i] / c1;
                const double vhat = m2[i] / c2;
                model.parameter(i) -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
            }
        }
        const double train_loss = epoch_loss / static_cast<double>(seen);
        const double val_loss = val.empty() ? mean_loss(model, train) : mean_loss(model, val);
        if (!std::isfinite(val_loss)) throw Error(fmt::format("train: non-finite validation loss at epoch {}", epoch));
        result.log.epochs.push_back({epoch, train_loss, val_loss});

        if (val_loss < best - cfg.min_delta) {
            best = val_loss;
            since_best = 0;
            result.model = model;
            result.log.best_epoch = epoch;
        } else if (++since_best >= cfg.patience) {
            result.log.stop = StopReason::Patience;
            break;
        }
    }
    return result;
}

std::vector<Sample> samples_from(std::size_t outputs, const std::vector<const FusedEntry*>& entries) {
    if (outputs != 1 && outputs != kNumFeatures && outputs != kNumFeatures + 1)
        throw Error(fmt::format("unsupported output layout {}", outputs));
    std::vector<Sample> out;
    std::vector<std::string> missing;
    for (const FusedEntry* e : entries) {
        if (e->label.excluded) continue;
        const bool has_features = e->features &&
            std::any_of(e->features->train_mask.begin(), e->features->train_mask.end(), [](bool b) { return b; });
        if (outputs == kNumFeatures && !has_features) continue;
        if (!e->embedding) {
            missing.push_back(e->image_id);
            continue;
        }
        Sample s;
        s.x = *e->embedding;
        if (outputs != kNumFeatures) {
            s.y.push_back(e->label.value);
            s.mask.push_back(1);
        }
        if (outputs != 1) {
            for (std::size_t i = 0; i < kNumFeatures; ++i) {
                const bool in = has_features && e->features->train_mask[i];
                s.y.push_back(in ? e->features->values[i] : 0.0);
                s.mask.push_back(in ? 1 : 0);
            }
        }
        out.push_back(std::move(s));
    }
    if (!missing.empty()) {
        std::string list;
        for (std::size_t i = 0; i < missing.size() && i < 20; ++i) list += (i ? ", " : "") + missing[i];
        if (missing.size() > 20) list += fmt::format(", ... ({} total)", missing.size());
        throw Error("entries without embedding: " + list);
    }
    return out;
}

TrainResult train(const FusedDataset& ds, const std::vector<FoldAssignment>& folds, int fold, ModelSpec model,
                  const TrainConfig& cfg) {
    const auto lookup = fold_lookup(folds);
    int max_fold = -1;
    for (const auto& f : folds) max_fold = std::max(max_fold, f.fold);
    if (fold < 0 || fold > max_fold) throw Error(fmt::format("train: fold {} out of range", fold));

    std::vector<const FusedEntry*> train_entries, val_entries;
    for (const auto& e : ds.entries) {
        auto it = lookup.find(e.image_id);
        if (it == lookup.end()) throw Error("train: no fold assignment for " + e.image_id);
        (it->second == fold ? val_entries : train_entries).push_back(&e);
    }
    const auto train_set = samples_from(model.outputs, train_entries);
    const auto val_set = samples_from(model.outputs, val_entries);
    if (!model.initialized() && model.input_dim == 0 && !train_set.empty()) model.input_dim = train_set.front().x.size();
    return train_samples(std::move(model), train_set, val_set, cfg);
}

void write_model_json(std::ostream& out, const ModelSpec& m, const TrainConfig& cfg) {
    using nlohmann::ordered_json;
    ordered_json doc;
    doc["format"] = "raterfuse-model";
    doc["version"] = kModelFormatVersion;
    doc["input_dim"] = m.input_dim;
    doc["hidden_dim"] = m.hidden_dim;
    doc["outputs"] = m.outputs;
    doc["activation"] = "tanh";
    doc["seed"] = cfg.seed;
    doc["config"] = {{"learning_rate", cfg.learning_rate}, {"batch_size", cfg.batch_size},
                     {"max_epochs", cfg.max_epochs},       {"patience", cfg.patience},
                     {"beta1", cfg.beta1},                 {"beta2", cfg.beta2},
                     {"epsilon", cfg.epsilon},             {"init_scale", cfg.init_scale},
                     {"min_delta", cfg.min_delta}};
    doc["weights"] = {{"hidden_w", m.hidden_w}, {"hidden_b", m.hidden_b}, {"out_w", m.out_w}, {"out_b", m.out_b}};
    out << doc.dump(2) << '\n';
}

ModelSpec read_model_json(std::istream& in) {
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model JSON: ") + e.what(), 0, "");
    }
    try {
        if (doc.at("format") != "raterfuse-model") throw ParseError("not a raterfuse model document", 0, "format");
        if (doc.at("version").get<int>() != kModelFormatVersion)
            throw ParseError("unsupported model version", 0, "version");
        ModelSpec m;
        m.input_dim = doc.at("input_dim").get<std::size_t>();
        m.hidden_dim = doc.at("hidden_dim").get<std::size_t>();
        m.outputs = doc.at("outputs").get<std::size_t>();
        const auto& w = doc.at("weights");
        m.hidden_w = w.at("hidden_w").get<std::vector<double>>();
        m.hidden_b = w.at("hidden_b").get<std::vector<double>>();
        m.out_w = w.at("out_w").get<std::vector<double>>();
        m.out_b = w.at("out_b").get<std::vector<double>>();
        m.check();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model JSON: ") + e.what(), 0, "");
    }
}

void write_training_log_csv(std::ostream& out, const TrainingLog& log) {
    out << "epoch,train_loss,val_loss\n";
    for (const auto& e : log.epochs)
        out << e.epoch << ',' << csv::format_double(e.train_loss) << ',' << csv::format_double(e.val_loss) << '\n';
}

}  // namespace raterfuse
