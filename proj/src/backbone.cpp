#include "chase/backbone.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "chase/kernels.hpp"

namespace chase {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kHeadOut = 12;  // 6 means | 6 log-variances

int head_mode_to_int(HeadMode m) { return static_cast<int>(m); }
HeadMode head_mode_from_int(int v) {
    if (v < 0 || v > 2) throw ConfigError("bad head mode");
    return static_cast<HeadMode>(v);
}

}  // namespace

bool BackboneModel::has_head(int cls) const {
    switch (config.head_mode) {
        case HeadMode::dual:
            return true;
        case HeadMode::connected_only:
            return cls == 0;
        case HeadMode::not_connected_only:
            return cls == 1;
    }
    return false;
}

std::string BackboneModel::head_prefix(int cls) const {
    // In a single-head model the one head scores both classes.
    if (config.head_mode == HeadMode::connected_only) return "head_c";
    if (config.head_mode == HeadMode::not_connected_only) return "head_n";
    return cls == 0 ? "head_c" : "head_n";
}

BackboneModel make_backbone(const BackboneConfig& cfg) {
    if (cfg.margin <= 0) throw ConfigError("margin must be > 0");
    if (cfg.lambda_margin < 0 || cfg.lambda_aux < 0)
        throw ConfigError("loss weights must be >= 0");
    BackboneModel m;
    m.config = cfg;
    m.gru = GruSpec{cfg.input_dim, cfg.hidden, "gru"};
    Rng init = Rng(cfg.seed).stream("init");
    add_gru_params(m.params, m.gru, init.stream("gru"));
    if (m.has_head(0))
        add_affine_params(m.params, "head_c", cfg.hidden, kHeadOut, init.stream("head_c"));
    if (m.has_head(1))
        add_affine_params(m.params, "head_n", cfg.hidden, kHeadOut, init.stream("head_n"));
    add_affine_params(m.params, "aux1", cfg.hidden, cfg.aux_hidden, init.stream("aux1"));
    add_affine_params(m.params, "aux2", cfg.aux_hidden, 2, init.stream("aux2"));
    return m;
}

void pack_time_major(const std::vector<SeqView>& seqs, const std::vector<int>& idx,
                     std::vector<double>& xtm, int frames, int input_dim) {
    const int B = static_cast<int>(idx.size());
    xtm.resize(static_cast<std::size_t>(frames) * B * input_dim);
    for (int b = 0; b < B; ++b) {
        const SeqView& s = seqs[static_cast<std::size_t>(idx[static_cast<std::size_t>(b)])];
        if (s.frames != frames) throw ShapeError("sequence length mismatch in batch");
        for (int t = 0; t < frames; ++t)
            std::memcpy(xtm.data() + (static_cast<std::size_t>(t) * B + b) * input_dim,
                        s.x + static_cast<std::size_t>(t) * input_dim,
                        sizeof(double) * static_cast<std::size_t>(input_dim));
    }
}

namespace {

struct ForwardState {
    GruCache cache;
    std::vector<double> out_c, out_n;  // (Tg*B) x 12 head outputs
    std::vector<double> pool;          // B x H
    std::vector<double> z1;            // B x aux_hidden, tanh applied
    std::vector<double> logits;        // B x 2
    std::vector<double> ell[2];        // per-sample sequence scores
};

void forward_internal(const BackboneModel& model, const double* xtm, int B, int frames,
                      ForwardState& st, BackboneOutput* outs) {
    const BackboneConfig& cfg = model.config;
    const int D = cfg.input_dim, H = cfg.hidden, Tg = frames - 1;
    if (frames < 2) throw ConfigError("backbone requires at least 2 frames");

    gru_forward(model.params, model.gru, xtm, B, Tg, st.cache);
    const double* hall = st.cache.hall.data();
    const int rows = Tg * B;

    auto run_head = [&](const std::string& prefix, std::vector<double>& out,
                        std::vector<double>& ell) {
        out.resize(static_cast<std::size_t>(rows) * kHeadOut);
        affine_forward(model.params, prefix, hall, out.data(), rows, H, kHeadOut);
        ell.assign(static_cast<std::size_t>(B), 0.0);
        for (int t = 0; t < Tg; ++t) {
            const double* target = xtm + (static_cast<std::size_t>(t) + 1) * B * D;
            for (int b = 0; b < B; ++b) {
                const double* row = out.data() + (static_cast<std::size_t>(t) * B + b) * kHeadOut;
                ell[static_cast<std::size_t>(b)] +=
                    gaussian_nll_row(target + static_cast<std::size_t>(b) * D, row, row + 6, D);
            }
        }
        for (auto& v : ell) v /= Tg;
    };

    if (model.config.head_mode == HeadMode::dual) {
        run_head("head_c", st.out_c, st.ell[0]);
        run_head("head_n", st.out_n, st.ell[1]);
    } else {
        run_head(model.head_prefix(0), st.out_c, st.ell[0]);
        st.ell[1] = st.ell[0];
    }

    // Auxiliary classifier on mean-pooled hidden states.
    st.pool.assign(static_cast<std::size_t>(B) * H, 0.0);
    for (int t = 0; t < Tg; ++t) {
        const double* ht = hall + static_cast<std::size_t>(t) * B * H;
        for (std::size_t i = 0; i < static_cast<std::size_t>(B) * H; ++i) st.pool[i] += ht[i];
    }
    for (auto& v : st.pool) v /= Tg;

    std::vector<double> a1(static_cast<std::size_t>(B) * cfg.aux_hidden);
    affine_forward(model.params, "aux1", st.pool.data(), a1.data(), B, H, cfg.aux_hidden);
    st.z1.resize(a1.size());
    vtanh(a1.data(), st.z1.data(), static_cast<int>(a1.size()));
    st.logits.resize(static_cast<std::size_t>(B) * 2);
    affine_forward(model.params, "aux2", st.z1.data(), st.logits.data(), B, cfg.aux_hidden, 2);

    for (int b = 0; b < B; ++b) {
        BackboneOutput& o = outs[b];
        o.ell_c = st.ell[0][static_cast<std::size_t>(b)];
        o.ell_n = st.ell[1][static_cast<std::size_t>(b)];
        o.gap = o.ell_n - o.ell_c;
        double neg[2] = {-o.ell_c, -o.ell_n};
        softmax_rows(neg, 1, 2);
        o.pi_hyp[0] = neg[0];
        o.pi_hyp[1] = neg[1];
        double lg[2] = {st.logits[static_cast<std::size_t>(b) * 2],
                        st.logits[static_cast<std::size_t>(b) * 2 + 1]};
        softmax_rows(lg, 1, 2);
        o.pi_aux[0] = lg[0];
        o.pi_aux[1] = lg[1];
    }
}

}  // namespace

void backbone_forward_batch(const BackboneModel& model, const double* xtm, int B,
                            int frames, BackboneOutput* outs) {
    ForwardState st;
    forward_internal(model, xtm, B, frames, st, outs);
}

std::vector<BackboneOutput> backbone_outputs(const BackboneModel& model,
                                             const std::vector<SeqView>& seqs,
                                             int batch_size) {
    std::vector<BackboneOutput> outs(seqs.size());
    if (seqs.empty()) return outs;
    std::vector<double> xtm;
    std::vector<int> idx;
    ForwardState st;
    for (std::size_t start = 0; start < seqs.size();
         start += static_cast<std::size_t>(batch_size)) {
        std::size_t stop = std::min(seqs.size(), start + static_cast<std::size_t>(batch_size));
        idx.clear();
        for (std::size_t i = start; i < stop; ++i) idx.push_back(static_cast<int>(i));
        pack_time_major(seqs, idx, xtm, seqs[start].frames, model.config.input_dim);
        forward_internal(model, xtm.data(), static_cast<int>(idx.size()),
                         seqs[start].frames, st, outs.data() + start);
    }
    return outs;
}

double backbone_loss(const BackboneOutput& out, int label, const BackboneConfig& cfg) {
    if (label != 0 && label != 1) throw ConfigError("label must be 0 or 1");
    double ell_y = label == 0 ? out.ell_c : out.ell_n;
    double ell_other = label == 0 ? out.ell_n : out.ell_c;
    double hinge = std::max(0.0, cfg.margin - (ell_other - ell_y));
    double ce = -std::log(std::max(out.pi_aux[label], 1e-300));
    return ell_y + cfg.lambda_margin * hinge + cfg.lambda_aux * ce;
}

double backbone_loss_and_grad(BackboneModel& model, const double* xtm, int B, int frames,
                              const int* labels) {
    const BackboneConfig& cfg = model.config;
    const int D = cfg.input_dim, H = cfg.hidden, Tg = frames - 1;
    ForwardState st;
    std::vector<BackboneOutput> outs(static_cast<std::size_t>(B));
    forward_internal(model, xtm, B, frames, st, outs.data());

    const bool dual = cfg.head_mode == HeadMode::dual;
    double total = 0.0;
    std::vector<double> dell_c(static_cast<std::size_t>(B), 0.0);
    std::vector<double> dell_n(static_cast<std::size_t>(B), 0.0);
    std::vector<double> dlogits(static_cast<std::size_t>(B) * 2);
    const double inv_b = 1.0 / B;

    for (int b = 0; b < B; ++b) {
        int y = labels[b];
        const BackboneOutput& o = outs[static_cast<std::size_t>(b)];
        total += backbone_loss(o, y, cfg);

        double ell_y = y == 0 ? o.ell_c : o.ell_n;
        double ell_other = y == 0 ? o.ell_n : o.ell_c;
        bool hinge_active = cfg.margin - (ell_other - ell_y) > 0.0;
        double coef_y = 1.0 + (hinge_active ? cfg.lambda_margin : 0.0);
        double coef_other = hinge_active ? -cfg.lambda_margin : 0.0;
        if (dual) {
            dell_c[static_cast<std::size_t>(b)] = inv_b * (y == 0 ? coef_y : coef_other);
            dell_n[static_cast<std::size_t>(b)] = inv_b * (y == 0 ? coef_other : coef_y);
        } else {
            // Both classes reference one head; the hinge contributions cancel.
            dell_c[static_cast<std::size_t>(b)] = inv_b;
        }

        dlogits[static_cast<std::size_t>(b) * 2 + 0] =
            inv_b * cfg.lambda_aux * (o.pi_aux[0] - (y == 0 ? 1.0 : 0.0));
        dlogits[static_cast<std::size_t>(b) * 2 + 1] =
            inv_b * cfg.lambda_aux * (o.pi_aux[1] - (y == 1 ? 1.0 : 0.0));
    }

    const int rows = Tg * B;
    std::vector<double> dhall(static_cast<std::size_t>(rows) * H, 0.0);

    auto head_backward = [&](const std::string& prefix, const std::vector<double>& out,
                             const std::vector<double>& dell) {
        std::vector<double> dout(static_cast<std::size_t>(rows) * kHeadOut, 0.0);
        for (int t = 0; t < Tg; ++t) {
            const double* target = xtm + (static_cast<std::size_t>(t) + 1) * B * D;
            for (int b = 0; b < B; ++b) {
                double coeff = dell[static_cast<std::size_t>(b)] / Tg;
                if (coeff == 0.0) continue;
                std::size_t r = (static_cast<std::size_t>(t) * B + b) * kHeadOut;
                gaussian_nll_row_backward(target + static_cast<std::size_t>(b) * D,
                                          out.data() + r, out.data() + r + 6, D, coeff,
                                          dout.data() + r, dout.data() + r + 6);
            }
        }
        affine_backward(model.params, prefix, st.cache.hall.data(), dout.data(),
                        dhall.data(), rows, H, kHeadOut);
    };

    if (dual) {
        head_backward("head_c", st.out_c, dell_c);
        head_backward("head_n", st.out_n, dell_n);
    } else {
        head_backward(model.head_prefix(0), st.out_c, dell_c);
    }

    // Aux path: logits -> tanh hidden -> pooled hidden -> every step.
    std::vector<double> dz1(static_cast<std::size_t>(B) * cfg.aux_hidden, 0.0);
    affine_backward(model.params, "aux2", st.z1.data(), dlogits.data(), dz1.data(), B,
                    cfg.aux_hidden, 2);
    for (std::size_t i = 0; i < dz1.size(); ++i) dz1[i] *= 1.0 - st.z1[i] * st.z1[i];
    std::vector<double> dpool(static_cast<std::size_t>(B) * H, 0.0);
    affine_backward(model.params, "aux1", st.pool.data(), dz1.data(), dpool.data(), B, H,
                    cfg.aux_hidden);
    for (int t = 0; t < Tg; ++t) {
        double* dh = dhall.data() + static_cast<std::size_t>(t) * B * H;
        for (std::size_t i = 0; i < dpool.size(); ++i) dh[i] += dpool[i] / Tg;
    }

    gru_backward(model.params, model.gru, st.cache, dhall);
    return total * inv_b;
}

TrainedBackbone train_backbone(const std::vector<SeqView>& train,
                               const std::vector<int>& train_labels,
                               const std::vector<SeqView>& val,
                               const std::vector<int>& val_labels,
                               const BackboneConfig& cfg) {
    if (train.empty() || val.empty()) throw ConfigError("empty training or validation split");
    if (train.size() != train_labels.size() || val.size() != val_labels.size())
        throw ConfigError("label count mismatch");

    TrainedBackbone result{make_backbone(cfg), {}};
    BackboneModel& model = result.model;
    AdamOptimizer opt(model.params, cfg.lr);
    const int frames = train.front().frames;

    std::vector<double> xtm;
    auto train_batch = [&](const std::vector<int>& idx, int, int) {
        pack_time_major(train, idx, xtm, frames, cfg.input_dim);
        std::vector<int> lab(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i)
            lab[i] = train_labels[static_cast<std::size_t>(idx[i])];
        return backbone_loss_and_grad(model, xtm.data(), static_cast<int>(idx.size()),
                                      frames, lab.data());
    };
    auto val_loss = [&]() {
        auto outs = backbone_outputs(model, val, cfg.batch_size);
        double s = 0.0;
        for (std::size_t i = 0; i < outs.size(); ++i)
            s += backbone_loss(outs[i], val_labels[i], cfg);
        return s / static_cast<double>(outs.size());
    };

    result.log = fit_loop(static_cast<int>(train.size()), cfg.batch_size, cfg.epochs,
                          cfg.patience, Rng(cfg.seed).stream("shuffle"), model.params, opt,
                          train_batch, val_loss);
    return result;
}

std::string backbone_to_json(const BackboneModel& model, const std::vector<double>& norm_mean,
                             const std::vector<double>& norm_std) {
    ordered_json j;
    j["format_version"] = 1;
    j["kind"] = "backbone";
    ordered_json c;
    c["input_dim"] = model.config.input_dim;
    c["hidden"] = model.config.hidden;
    c["aux_hidden"] = model.config.aux_hidden;
    c["margin"] = model.config.margin;
    c["lambda_margin"] = model.config.lambda_margin;
    c["lambda_aux"] = model.config.lambda_aux;
    c["epochs"] = model.config.epochs;
    c["batch_size"] = model.config.batch_size;
    c["patience"] = model.config.patience;
    c["lr"] = model.config.lr;
    c["seed"] = model.config.seed;
    c["head_mode"] = head_mode_to_int(model.config.head_mode);
    j["config"] = std::move(c);
    j["norm_mean"] = norm_mean;
    j["norm_std"] = norm_std;
    ordered_json params;
    for (const auto& e : model.params.entries()) {
        ordered_json p;
        p["shape"] = e.value.shape;
        p["data"] = e.value.data;
        params[e.name] = std::move(p);
    }
    j["params"] = std::move(params);
    return j.dump();
}

BackboneModel backbone_from_json(const std::string& text, std::vector<double>* norm_mean,
                                 std::vector<double>* norm_std) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (j.at("kind").get<std::string>() != "backbone")
        throw ConfigError("checkpoint kind is not 'backbone'");
    BackboneConfig cfg;
    const auto& c = j.at("config");
    cfg.input_dim = c.at("input_dim").get<int>();
    cfg.hidden = c.at("hidden").get<int>();
    cfg.aux_hidden = c.at("aux_hidden").get<int>();
    cfg.margin = c.at("margin").get<double>();
    cfg.lambda_margin = c.at("lambda_margin").get<double>();
    cfg.lambda_aux = c.at("lambda_aux").get<double>();
    cfg.epochs = c.at("epochs").get<int>();
    cfg.batch_size = c.at("batch_size").get<int>();
    cfg.patience = c.at("patience").get<int>();
    cfg.lr = c.at("lr").get<double>();
    cfg.seed = c.at("seed").get<std::uint64_t>();
    cfg.head_mode = head_mode_from_int(c.at("head_mode").get<int>());
    BackboneModel model = make_backbone(cfg);
    for (auto& e : model.params.entries()) {
        const auto& p = j.at("params").at(e.name);
        auto shape = p.at("shape").get<std::vector<int>>();
        auto data = p.at("data").get<std::vector<double>>();
        e.value = Tensor(shape, std::move(data));
    }
    if (norm_mean) *norm_mean = j.at("norm_mean").get<std::vector<double>>();
    if (norm_std) *norm_std = j.at("norm_std").get<std::vector<double>>();
    return model;
}

}  // namespace chase
