#pragma once

#include <algorithm>
#include <cstring>
#include <vector>

#include "grn/adam.hpp"
#include "grn/conv.hpp"
#include "grn/layers.hpp"
#include "grn/rng.hpp"
#include "grn/tensor.hpp"

namespace grn {

// ---------------------------------------------------------------------------
// Configuration. Every layer extent below is derivable from these fields; the
// defaults reproduce the published architecture (36→72 channel encoder with
// 9×8×63 embeddings, 288×18 relation features).
// ---------------------------------------------------------------------------

struct GrnConfig {
    int n_groups = 9;
    int channels_per_group = 4;
    int grid_h = 5, grid_w = 5;
    int input_time = 750;
    int temporal_kernel = 65;
    int temporal_stride3 = 10;
    int depth_multiplier = 2;
    int relation_kernel = 10;
    int relation_channels_per_group = 32;
    int pool_window = 2, pool_stride = 2;
    int fc_hidden = 8;
    int n_classes = 3;
    bool relation_bn = true;

    // encoder
    int l1_filters() const { return n_groups * channels_per_group; }
    int spatial_channels() const { return l1_filters() * depth_multiplier; }
    int group_channels() const { return channels_per_group * depth_multiplier; }
    int t_after_l1() const { return input_time - temporal_kernel + 1; }
    int emb_time() const { return (t_after_l1() - temporal_kernel) / temporal_stride3 + 1; }
    int64_t emb_size() const { return int64_t(spatial_channels()) * emb_time(); }
    // relation module
    int rel_channels() const { return n_groups * relation_channels_per_group; }
    int rel1_time() const { return emb_time() - relation_kernel + 1; }
    int pool_time() const { return (rel1_time() - pool_window) / pool_stride + 1; }
    int rel2_time() const { return pool_time() - relation_kernel + 1; }

    void validate() const {
        if (n_groups < 1 || channels_per_group < 1 || depth_multiplier < 1 || fc_hidden < 1 ||
            n_classes < 2)
            fail(ErrorKind::Parameter, "GrnConfig: counts must be positive (n_classes >= 2)");
        if (input_time < 2 * temporal_kernel)
            fail(ErrorKind::Parameter, "GrnConfig: input_time too short for two temporal layers");
        if (emb_time() < relation_kernel || pool_time() < relation_kernel ||
            rel1_time() < pool_window)
            fail(ErrorKind::Parameter, "GrnConfig: relation-module extents collapse to zero");
    }

    // A downscaled geometry used by the gradient suite.
    static GrnConfig reduced() {
        GrnConfig c;
        c.n_groups = 2;
        c.input_time = 100;
        c.temporal_kernel = 9;
        c.temporal_stride3 = 3;
        c.relation_kernel = 4;
        c.relation_channels_per_group = 6;
        return c;
    }

    ConvSpec conv1_spec() const {
        return ConvSpec::dense3(1, l1_filters(), {1, 1, temporal_kernel});
    }
    ConvSpec conv2_spec() const {
        return ConvSpec::depthwise(l1_filters(), depth_multiplier, {grid_h, grid_w, 1});
    }
    ConvSpec conv3_spec() const {
        return ConvSpec::depthwise(spatial_channels(), 1, {1, 1, temporal_kernel},
                                   {1, 1, temporal_stride3});
    }
    ConvSpec rconv1_spec() const {
        return ConvSpec::grouped(2 * spatial_channels(), rel_channels(), n_groups,
                                 {1, 1, relation_kernel});
    }
    ConvSpec rconv2_spec() const {
        return ConvSpec::dense3(rel_channels(), rel_channels(), {1, 1, relation_kernel});
    }
};

// ---------------------------------------------------------------------------
// Parameters: encoder f (3 conv + 3 BN) and relation module g (2 conv + 2 BN
// + 2 FC). BN gamma/beta are learnable; running stats are state.
// ---------------------------------------------------------------------------

struct GrnParams {
    GrnConfig cfg;
    Tensor conv1_w, conv1_b, conv2_w, conv2_b, conv3_w, conv3_b;
    BnParams bn1, bn2, bn3;
    Tensor rconv1_w, rconv1_b, rconv2_w, rconv2_b;
    BnParams rbn1, rbn2;
    Tensor fc1_w, fc1_b, fc2_w, fc2_b;

    explicit GrnParams(const GrnConfig& c = GrnConfig()) : cfg(c) {
        cfg.validate();
        conv1_w = Tensor(cfg.conv1_spec().weight_shape());
        conv1_b = Tensor({cfg.l1_filters()});
        conv2_w = Tensor(cfg.conv2_spec().weight_shape());
        conv2_b = Tensor({cfg.spatial_channels()});
        conv3_w = Tensor(cfg.conv3_spec().weight_shape());
        conv3_b = Tensor({cfg.spatial_channels()});
        bn1 = BnParams(cfg.l1_filters());
        bn2 = BnParams(cfg.spatial_channels());
        bn3 = BnParams(cfg.spatial_channels());
        rconv1_w = Tensor(cfg.rconv1_spec().weight_shape());
        rconv1_b = Tensor({cfg.rel_channels()});
        rconv2_w = Tensor(cfg.rconv2_spec().weight_shape());
        rconv2_b = Tensor({cfg.rel_channels()});
        rbn1 = BnParams(cfg.rel_channels());
        rbn2 = BnParams(cfg.rel_channels());
        fc1_w = Tensor({cfg.fc_hidden, cfg.rel_channels()});
        fc1_b = Tensor({cfg.fc_hidden});
        fc2_w = Tensor({1, cfg.fc_hidden});
        fc2_b = Tensor({1});
    }

    // Fixed block order; Adam state and checkpoints rely on it.
    std::vector<ParamRef> learnable() {
        return {
            {"conv1_w", &conv1_w},   {"conv1_b", &conv1_b},   {"bn1_gamma", &bn1.gamma},
            {"bn1_beta", &bn1.beta}, {"conv2_w", &conv2_w},   {"conv2_b", &conv2_b},
            {"bn2_gamma", &bn2.gamma}, {"bn2_beta", &bn2.beta}, {"conv3_w", &conv3_w},
            {"conv3_b", &conv3_b},   {"bn3_gamma", &bn3.gamma}, {"bn3_beta", &bn3.beta},
            {"rconv1_w", &rconv1_w}, {"rconv1_b", &rconv1_b}, {"rbn1_gamma", &rbn1.gamma},
            {"rbn1_beta", &rbn1.beta}, {"rconv2_w", &rconv2_w}, {"rconv2_b", &rconv2_b},
            {"rbn2_gamma", &rbn2.gamma}, {"rbn2_beta", &rbn2.beta}, {"fc1_w", &fc1_w},
            {"fc1_b", &fc1_b},       {"fc2_w", &fc2_w},       {"fc2_b", &fc2_b},
        };
    }

    std::vector<ParamRef> state_tensors() {
        return {
            {"bn1_rmean", &bn1.running_mean},   {"bn1_rvar", &bn1.running_var},
            {"bn2_rmean", &bn2.running_mean},   {"bn2_rvar", &bn2.running_var},
            {"bn3_rmean", &bn3.running_mean},   {"bn3_rvar", &bn3.running_var},
            {"rbn1_rmean", &rbn1.running_mean}, {"rbn1_rvar", &rbn1.running_var},
            {"rbn2_rmean", &rbn2.running_mean}, {"rbn2_rvar", &rbn2.running_var},
        };
    }

    void zero_grad() {
        for (auto& p : learnable()) p.tensor->zero_grad();
    }

    // Fan-in scaled zero-mean normal, std = sqrt(2 / fan_in). Biases zero,
    // BN gamma 1 / beta 0 (set in BnParams).
    void init_weights(uint64_t seed) {
        SplitMix64 rng(seed);
        auto fill = [&](Tensor& w, int fan_in) {
            const double std = std::sqrt(2.0 / double(fan_in));
            for (auto& v : w.data) v = std * rng.gaussian();
        };
        fill(conv1_w, cfg.temporal_kernel);
        fill(conv2_w, cfg.grid_h * cfg.grid_w);
        fill(conv3_w, cfg.temporal_kernel);
        fill(rconv1_w, 2 * cfg.group_channels() * cfg.relation_kernel);
        fill(rconv2_w, cfg.rel_channels() * cfg.relation_kernel);
        fill(fc1_w, cfg.rel_channels());
        fill(fc2_w, cfg.fc_hidden);
    }

    void set_finalized() {  // mark running stats usable even if never trained (tests)
        bn1.seen = bn2.seen = bn3.seen = rbn1.seen = rbn2.seen = true;
    }
};

// ---------------------------------------------------------------------------
// Encoder: 1×5×5×750 → 36×5×5×686 → 72×1×1×686 → 72×1×1×63, BN+ELU after each
// conv. Channels 8g..8g+7 of the 72 form group g, so the grouped embedding is
// a free view of the flat buffer.
// ---------------------------------------------------------------------------

struct EncodeCache {
    int N = 0;
    bool train = false;
    std::vector<double> conv1_out, elu1_out, conv2_out, elu2_out, conv3_out, emb;
    BnCache bn1c, bn2c, bn3c;
};

// x: N × (grid_h*grid_w*input_time); emb: N × emb_size().
inline void encode_batch(const double* x, int N, GrnParams& P, bool train, EncodeCache* cache,
                         double* emb) {
    const GrnConfig& c = P.cfg;
    const int C1 = c.l1_filters(), C2 = c.spatial_channels();
    const int T1 = c.t_after_l1(), L = c.emb_time();
    const int64_t plane1 = int64_t(c.grid_h) * c.grid_w * T1;
    EncodeCache local;
    EncodeCache& cc = cache ? *cache : local;
    cc.N = N;
    cc.train = train;

    cc.conv1_out.assign(size_t(N) * C1 * plane1, 0.0);
    conv_forward_batch(x, N, 1, c.grid_h, c.grid_w, c.input_time, c.conv1_spec(), P.conv1_w,
                       P.conv1_b, cc.conv1_out.data());
    cc.elu1_out.resize(cc.conv1_out.size());
    bn_forward(cc.conv1_out.data(), N, C1, plane1, P.bn1, train, &cc.bn1c, cc.elu1_out.data());
    elu_forward(cc.elu1_out.data(), int64_t(cc.elu1_out.size()), cc.elu1_out.data());

    cc.conv2_out.assign(size_t(N) * C2 * T1, 0.0);
    conv_forward_batch(cc.elu1_out.data(), N, C1, c.grid_h, c.grid_w, T1, c.conv2_spec(), P.conv2_w,
                       P.conv2_b, cc.conv2_out.data());
    cc.elu2_out.resize(cc.conv2_out.size());
    bn_forward(cc.conv2_out.data(), N, C2, T1, P.bn2, train, &cc.bn2c, cc.elu2_out.data());
    elu_forward(cc.elu2_out.data(), int64_t(cc.elu2_out.size()), cc.elu2_out.data());

    cc.conv3_out.assign(size_t(N) * C2 * L, 0.0);
    conv_forward_batch(cc.elu2_out.data(), N, C2, 1, 1, T1, c.conv3_spec(), P.conv3_w, P.conv3_b,
                       cc.conv3_out.data());
    bn_forward(cc.conv3_out.data(), N, C2, L, P.bn3, train, &cc.bn3c, emb);
    elu_forward(emb, int64_t(N) * C2 * L, emb);
    if (cache) cc.emb.assign(emb, emb + int64_t(N) * C2 * L);
}

// Accumulates parameter gradients; the input gradient is discarded.
inline void encode_backward(const double* gemb, const double* x, EncodeCache& cc, GrnParams& P) {
    const GrnConfig& c = P.cfg;
    const int N = cc.N;
    const int C1 = c.l1_filters(), C2 = c.spatial_channels();
    const int T1 = c.t_after_l1(), L = c.emb_time();
    const int64_t plane1 = int64_t(c.grid_h) * c.grid_w * T1;

    std::vector<double> g3(static_cast<size_t>(N) * C2 * L);
    elu_backward(gemb, cc.emb.data(), int64_t(g3.size()), g3.data());
    std::vector<double> gc3(g3.size());
    if (cc.train)
        bn_backward_train(g3.data(), cc.conv3_out.data(), N, C2, L, P.bn3, cc.bn3c, gc3.data(),
                          P.bn3.gamma.grad.data(), P.bn3.beta.grad.data());
    else
        bn_backward_eval(g3.data(), cc.conv3_out.data(), N, C2, L, P.bn3, gc3.data(),
                         P.bn3.gamma.grad.data(), P.bn3.beta.grad.data());
    g3.clear();
    g3.shrink_to_fit();

    std::vector<double> g2(static_cast<size_t>(N) * C2 * T1, 0.0);
    conv_backward_batch(gc3.data(), cc.elu2_out.data(), N, C2, 1, 1, T1, c.conv3_spec(), P.conv3_w,
                        g2.data(), P.conv3_w.grad.data(), P.conv3_b.grad.data());
    gc3.clear();
    gc3.shrink_to_fit();

    elu_backward(g2.data(), cc.elu2_out.data(), int64_t(g2.size()), g2.data());
    std::vector<double> gc2(g2.size());
    if (cc.train)
        bn_backward_train(g2.data(), cc.conv2_out.data(), N, C2, T1, P.bn2, cc.bn2c, gc2.data(),
                          P.bn2.gamma.grad.data(), P.bn2.beta.grad.data());
    else
        bn_backward_eval(g2.data(), cc.conv2_out.data(), N, C2, T1, P.bn2, gc2.data(),
                         P.bn2.gamma.grad.data(), P.bn2.beta.grad.data());
    g2.clear();
    g2.shrink_to_fit();

    std::vector<double> g1(static_cast<size_t>(N) * C1 * plane1, 0.0);
    conv_backward_batch(gc2.data(), cc.elu1_out.data(), N, C1, c.grid_h, c.grid_w, T1,
                        c.conv2_spec(), P.conv2_w, g1.data(), P.conv2_w.grad.data(),
                        P.conv2_b.grad.data());
    gc2.clear();
    gc2.shrink_to_fit();

    elu_backward(g1.data(), cc.elu1_out.data(), int64_t(g1.size()), g1.data());
    std::vector<double> gc1(g1.size());
    if (cc.train)
        bn_backward_train(g1.data(), cc.conv1_out.data(), N, C1, plane1, P.bn1, cc.bn1c, gc1.data(),
                          P.bn1.gamma.grad.data(), P.bn1.beta.grad.data());
    else
        bn_backward_eval(g1.data(), cc.conv1_out.data(), N, C1, plane1, P.bn1, gc1.data(),
                         P.bn1.gamma.grad.data(), P.bn1.beta.grad.data());
    g1.clear();
    g1.shrink_to_fit();

    conv_backward_batch(gc1.data(), x, N, 1, c.grid_h, c.grid_w, c.input_time, c.conv1_spec(),
                        P.conv1_w, nullptr, P.conv1_w.grad.data(), P.conv1_b.grad.data());
}

// ---------------------------------------------------------------------------
// Relation module over a batch of (query, prototype) pairs. Pair n reads
// embeddings emb[qi[n]] and emb[pj[n]] from a shared S×emb_size buffer.
// ---------------------------------------------------------------------------

struct RelationCache {
    int N = 0;
    bool train = false;
    std::vector<double> x_il, conv1_out, elu1_out, pool_out, conv2_out, elu2_out, gap_out, fc1_act,
        r;
    BnCache bn1c, bn2c;
};

// Query channels occupy the first half of each concatenated group.
inline void interleave_pairs(const double* emb, const int* qi, const int* pj, int N,
                             const GrnConfig& c, double* out) {
    const int G = c.n_groups, gc = c.group_channels(), L = c.emb_time();
    const int64_t es = c.emb_size();
    for (int n = 0; n < N; ++n) {
        const double* q = emb + int64_t(qi[n]) * es;
        const double* p = emb + int64_t(pj[n]) * es;
        double* o = out + int64_t(n) * 2 * es;
        for (int g = 0; g < G; ++g) {
            std::memcpy(o + int64_t(2 * g) * gc * L, q + int64_t(g) * gc * L,
                        size_t(gc) * L * sizeof(double));
            std::memcpy(o + int64_t(2 * g + 1) * gc * L, p + int64_t(g) * gc * L,
                        size_t(gc) * L * sizeof(double));
        }
    }
}

inline void relation_forward_batch(const double* emb, const int* qi, const int* pj, int N,
                                   GrnParams& P, bool train, RelationCache* cache, double* r_out) {
    const GrnConfig& c = P.cfg;
    const int CR = c.rel_channels();
    const int L = c.emb_time(), L1 = c.rel1_time(), Lp = c.pool_time(), L2 = c.rel2_time();
    RelationCache local;
    RelationCache& cc = cache ? *cache : local;
    cc.N = N;
    cc.train = train;

    cc.x_il.resize(size_t(N) * 2 * c.emb_size());
    interleave_pairs(emb, qi, pj, N, c, cc.x_il.data());

    cc.conv1_out.assign(size_t(N) * CR * L1, 0.0);
    conv_forward_batch(cc.x_il.data(), N, 2 * c.spatial_channels(), 1, 1, L, c.rconv1_spec(),
                       P.rconv1_w, P.rconv1_b, cc.conv1_out.data());
    cc.elu1_out.resize(cc.conv1_out.size());
    if (c.relation_bn)
        bn_forward(cc.conv1_out.data(), N, CR, L1, P.rbn1, train, &cc.bn1c, cc.elu1_out.data());
    else
        cc.elu1_out = cc.conv1_out;
    elu_forward(cc.elu1_out.data(), int64_t(cc.elu1_out.size()), cc.elu1_out.data());

    cc.pool_out.resize(size_t(N) * CR * Lp);
    avg_pool_time_rows(cc.elu1_out.data(), int64_t(N) * CR, L1, c.pool_window, c.pool_stride,
                       cc.pool_out.data());

    cc.conv2_out.assign(size_t(N) * CR * L2, 0.0);
    conv_forward_batch(cc.pool_out.data(), N, CR, 1, 1, Lp, c.rconv2_spec(), P.rconv2_w, P.rconv2_b,
                       cc.conv2_out.data());
    cc.elu2_out.resize(cc.conv2_out.size());
    if (c.relation_bn)
        bn_forward(cc.conv2_out.data(), N, CR, L2, P.rbn2, train, &cc.bn2c, cc.elu2_out.data());
    else
        cc.elu2_out = cc.conv2_out;
    elu_forward(cc.elu2_out.data(), int64_t(cc.elu2_out.size()), cc.elu2_out.data());

    cc.gap_out.resize(size_t(N) * CR);
    global_avg_pool_batch(cc.elu2_out.data(), N, CR, L2, cc.gap_out.data());

    cc.fc1_act.resize(size_t(N) * c.fc_hidden);
    dense_forward_batch(cc.gap_out.data(), N, P.fc1_w, P.fc1_b, cc.fc1_act.data());
    elu_forward(cc.fc1_act.data(), int64_t(cc.fc1_act.size()), cc.fc1_act.data());

    cc.r.resize(size_t(N));
    std::vector<double> z(static_cast<size_t>(N));
    dense_forward_batch(cc.fc1_act.data(), N, P.fc2_w, P.fc2_b, z.data());
    for (int n = 0; n < N; ++n) cc.r[size_t(n)] = sigmoid(z[size_t(n)]);
    std::copy(cc.r.begin(), cc.r.end(), r_out);
}

// gr is dLoss/dr per pair; embedding gradients are scatter-added into gemb.
inline void relation_backward_batch(const double* gr, const int* qi, const int* pj,
                                    RelationCache& cc, GrnParams& P, double* gemb) {
    const GrnConfig& c = P.cfg;
    const int N = cc.N, CR = c.rel_channels();
    const int L = c.emb_time(), L1 = c.rel1_time(), Lp = c.pool_time(), L2 = c.rel2_time();
    const int gc = c.group_channels();
    const int64_t es = c.emb_size();

    // sigmoid + fc2
    std::vector<double> gz(static_cast<size_t>(N));
    for (int n = 0; n < N; ++n) {
        const double r = cc.r[size_t(n)];
        gz[size_t(n)] = gr[n] * r * (1.0 - r);
    }
    std::vector<double> gfc1(static_cast<size_t>(N) * c.fc_hidden);
    dense_backward_batch(gz.data(), cc.fc1_act.data(), N, P.fc2_w, gfc1.data(),
                         P.fc2_w.grad.data(), P.fc2_b.grad.data());
    elu_backward(gfc1.data(), cc.fc1_act.data(), int64_t(gfc1.size()), gfc1.data());
    std::vector<double> ggap(static_cast<size_t>(N) * CR);
    dense_backward_batch(gfc1.data(), cc.gap_out.data(), N, P.fc1_w, ggap.data(),
                         P.fc1_w.grad.data(), P.fc1_b.grad.data());

    std::vector<double> g2(static_cast<size_t>(N) * CR * L2);
    global_avg_pool_batch_backward(ggap.data(), N, CR, L2, g2.data());
    elu_backward(g2.data(), cc.elu2_out.data(), int64_t(g2.size()), g2.data());
    std::vector<double> gc2(g2.size());
    if (c.relation_bn) {
        if (cc.train)
            bn_backward_train(g2.data(), cc.conv2_out.data(), N, CR, L2, P.rbn2, cc.bn2c,
                              gc2.data(), P.rbn2.gamma.grad.data(), P.rbn2.beta.grad.data());
        else
            bn_backward_eval(g2.data(), cc.conv2_out.data(), N, CR, L2, P.rbn2, gc2.data(),
                             P.rbn2.gamma.grad.data(), P.rbn2.beta.grad.data());
    } else {
        gc2 = g2;
    }

    std::vector<double> gpool(static_cast<size_t>(N) * CR * Lp, 0.0);
    conv_backward_batch(gc2.data(), cc.pool_out.data(), N, CR, 1, 1, Lp, c.rconv2_spec(),
                        P.rconv2_w, gpool.data(), P.rconv2_w.grad.data(), P.rconv2_b.grad.data());

    std::vector<double> g1(static_cast<size_t>(N) * CR * L1);
    avg_pool_time_rows_backward(gpool.data(), int64_t(N) * CR, L1, c.pool_window, c.pool_stride,
                                g1.data());
    elu_backward(g1.data(), cc.elu1_out.data(), int64_t(g1.size()), g1.data());
    std::vector<double> gc1(g1.size());
    if (c.relation_bn) {
        if (cc.train)
            bn_backward_train(g1.data(), cc.conv1_out.data(), N, CR, L1, P.rbn1, cc.bn1c,
                              gc1.data(), P.rbn1.gamma.grad.data(), P.rbn1.beta.grad.data());
        else
            bn_backward_eval(g1.data(), cc.conv1_out.data(), N, CR, L1, P.rbn1, gc1.data(),
                             P.rbn1.gamma.grad.data(), P.rbn1.beta.grad.data());
    } else {
        gc1 = g1;
    }

    std::vector<double> gx(static_cast<size_t>(N) * 2 * es, 0.0);
    conv_backward_batch(gc1.data(), cc.x_il.data(), N, 2 * c.spatial_channels(), 1, 1, L,
                        c.rconv1_spec(), P.rconv1_w, gx.data(), P.rconv1_w.grad.data(),
                        P.rconv1_b.grad.data());

    // interleave backward: de-interleave into the shared embedding grads
    for (int n = 0; n < N; ++n) {
        const double* g = gx.data() + int64_t(n) * 2 * es;
        double* gq = gemb + int64_t(qi[n]) * es;
        double* gp = gemb + int64_t(pj[n]) * es;
        for (int grp = 0; grp < c.n_groups; ++grp) {
            const double* sq = g + int64_t(2 * grp) * gc * L;
            const double* sp = g + int64_t(2 * grp + 1) * gc * L;
            double* dq = gq + int64_t(grp) * gc * L;
            double* dp = gp + int64_t(grp) * gc * L;
            for (int64_t i = 0; i < int64_t(gc) * L; ++i) {
                dq[i] += sq[i];
                dp[i] += sp[i];
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Spec-level single-sample API.
// ---------------------------------------------------------------------------

struct GridEpoch {
    Tensor grid;  // 5×5×750 (grid_h × grid_w × input_time)
    int label = 0;
    double fs = 250.0;
};

struct Prototype {
    int class_id = 0;
    Tensor embedding;  // {n_groups, group_channels, emb_time}
};

inline std::vector<int> embedding_shape(const GrnConfig& c) {
    return {c.n_groups, c.group_channels(), c.emb_time()};
}

inline Tensor encode(const GridEpoch& epoch, GrnParams& P, bool train = false) {
    const GrnConfig& c = P.cfg;
    require_shape(epoch.grid, {c.grid_h, c.grid_w, c.input_time}, "encode input");
    Tensor emb(embedding_shape(c));
    encode_batch(epoch.grid.data.data(), 1, P, train, nullptr, emb.data.data());
    return emb;
}

inline Tensor interleave_groups(const Tensor& a, const Tensor& b, const GrnConfig& c) {
    require_shape(a, embedding_shape(c), "interleave_groups lhs");
    if (!a.same_shape(b))
        fail(ErrorKind::Dimension, "interleave_groups: shape mismatch " + a.shape_str() + " vs " +
                                       b.shape_str());
    Tensor out({c.n_groups, 2 * c.group_channels(), c.emb_time()});
    std::vector<double> emb(a.data);
    emb.insert(emb.end(), b.data.begin(), b.data.end());
    const int qi = 0, pj = 1;
    interleave_pairs(emb.data(), &qi, &pj, 1, c, out.data.data());
    return out;
}

inline double relation_score(const Tensor& query, const Prototype& proto, GrnParams& P,
                             bool train = false) {
    require_shape(query, embedding_shape(P.cfg), "relation_score query");
    require_shape(proto.embedding, embedding_shape(P.cfg), "relation_score prototype");
    std::vector<double> emb(query.data);
    emb.insert(emb.end(), proto.embedding.data.begin(), proto.embedding.data.end());
    const int qi = 0, pj = 1;
    double r = 0.0;
    relation_forward_batch(emb.data(), &qi, &pj, 1, P, train, nullptr, &r);
    return r;
}

struct Prediction {
    int class_id = 0;
    std::vector<double> sigma;  // softmax over relation scores
    std::vector<double> r;      // raw relation scores
};

inline Prediction predict(const GridEpoch& query, const std::vector<Prototype>& prototypes,
                          GrnParams& P) {
    const GrnConfig& c = P.cfg;
    if (int(prototypes.size()) != c.n_classes)
        fail(ErrorKind::Protocol, "predict: expected " + std::to_string(c.n_classes) +
                                      " prototypes, got " + std::to_string(prototypes.size()));
    Tensor q = encode(query, P, false);
    Prediction out;
    out.r.resize(prototypes.size());
    // one batched relation pass: pair k = (query, prototype k)
    std::vector<double> emb(q.data);
    std::vector<int> qi(prototypes.size(), 0), pj(prototypes.size());
    for (size_t k = 0; k < prototypes.size(); ++k) {
        require_shape(prototypes[k].embedding, embedding_shape(c), "predict prototype");
        emb.insert(emb.end(), prototypes[k].embedding.data.begin(),
                   prototypes[k].embedding.data.end());
        pj[k] = int(k) + 1;
    }
    relation_forward_batch(emb.data(), qi.data(), pj.data(), int(prototypes.size()), P, false,
                           nullptr, out.r.data());
    out.sigma = softmax(out.r);
    out.class_id = 0;
    for (size_t k = 1; k < out.sigma.size(); ++k)
        if (out.sigma[k] > out.sigma[size_t(out.class_id)]) out.class_id = int(k);
    return out;
}

// Per-class arithmetic mean of support embeddings, summed in ascending trial order.
inline std::vector<Prototype> prototypes_from_embeddings(const double* emb,
                                                         const std::vector<int>& labels,
                                                         const GrnConfig& c) {
    std::vector<Prototype> protos(static_cast<size_t>(c.n_classes));
    const int64_t es = c.emb_size();
    std::vector<int> counts(static_cast<size_t>(c.n_classes), 0);
    for (int k = 0; k < c.n_classes; ++k) {
        protos[size_t(k)].class_id = k;
        protos[size_t(k)].embedding = Tensor(embedding_shape(c));
    }
    for (size_t i = 0; i < labels.size(); ++i) {
        const int k = labels[i];
        if (k < 0 || k >= c.n_classes)
            fail(ErrorKind::Protocol, "prototypes: label " + std::to_string(k) + " out of range");
        auto& d = protos[size_t(k)].embedding.data;
        const double* e = emb + int64_t(i) * es;
        for (int64_t j = 0; j < es; ++j) d[size_t(j)] += e[j];
        ++counts[size_t(k)];
    }
    for (int k = 0; k < c.n_classes; ++k) {
        if (counts[size_t(k)] == 0)
            fail(ErrorKind::Protocol, "prototypes: class " + std::to_string(k) + " has no support trials");
        const double inv = 1.0 / double(counts[size_t(k)]);
        for (auto& v : protos[size_t(k)].embedding.data) v *= inv;
    }
    return protos;
}

}  // namespace grn
