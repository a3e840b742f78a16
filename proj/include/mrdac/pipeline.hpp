#pragma once

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mrdac/aggregation.hpp"
#include "mrdac/bitstream.hpp"
#include "mrdac/contrastive.hpp"
#include "mrdac/error.hpp"
#include "mrdac/metrics.hpp"
#include "mrdac/motion.hpp"
#include "mrdac/scheduler.hpp"
#include "mrdac/synth.hpp"
#include "mrdac/tensor.hpp"

namespace mrdac {

// Analysis / synthesis plugin pair. The defaults form an approximate identity
// (2x bilinear down / up), which isolates reconstruction error to the motion
// and aggregation stages.
using FeatureExtractor = std::function<Tensord(const Frame&)>;
using FrameGenerator =
    std::function<Frame(const Tensord& features, std::size_t h, std::size_t w)>;

inline FeatureExtractor default_extractor() {
    return [](const Frame& f) {
        return bilinear_resize(f, std::max<std::size_t>(1, f.height() / 2),
                               std::max<std::size_t>(1, f.width() / 2));
    };
}

inline FrameGenerator default_generator() {
    return [](const Tensord& features, std::size_t h, std::size_t w) {
        return bilinear_resize(features, h, w);
    };
}

struct PipelineConfig {
    GopConfig gop;
    std::uint8_t quant_log2 = 6;
    SparseToDenseParams motion;   // kp_variance, w_bg, beta
    double agg_sigma = 0.0;       // <= 0 derives half the reference spacing
    bool use_jacobians = false;
    CostModel cost;
    bool compute_ms_ssim = true;

    double sigma() const {
        if (agg_sigma > 0.0) return agg_sigma;
        const std::uint32_t spacing =
            (gop.strategy == Strategy::RP || gop.strategy == Strategy::RP_RRB)
                ? gop.rp_interval
                : gop.gop_size;
        return std::max(1.0, spacing / 2.0);
    }
};

// ---------------------------------------------------------------------------
// encoder: ground-truth keypoints -> quantized, temporally predicted payloads
// ---------------------------------------------------------------------------

inline Bitstream encode_sequence(const Sequence& seq, const PipelineConfig& cfg) {
    if (seq.num_frames() == 0) throw InvalidInputError("encode_sequence on an empty sequence");
    const SchedulePlan sched = plan(static_cast<std::uint32_t>(seq.num_frames()), cfg.gop);

    Bitstream stream;
    BitstreamHeader& h = stream.header;
    h.width = static_cast<std::uint16_t>(seq.width());
    h.height = static_cast<std::uint16_t>(seq.height());
    h.fps_num = static_cast<std::uint16_t>(std::lround(seq.fps));
    h.fps_den = 1;
    h.num_keypoints = static_cast<std::uint8_t>(seq.gt_keypoints.front().size());
    h.quant_log2 = cfg.quant_log2;
    h.has_jacobians = cfg.use_jacobians && seq.gt_keypoints.front().has_jacobians();
    h.gop = cfg.gop;

    const double step = h.quant_step();
    std::vector<std::int32_t> predictor;
    for (std::uint32_t t = 0; t < seq.num_frames(); ++t) {
        KeypointSet kps = seq.gt_keypoints[t];
        if (!h.has_jacobians)
            for (Keypoint& p : kps.points) p.jacobian.reset();
        const std::vector<std::int32_t> idx = quantize_keypoints(kps, step);

        FrameRecord rec;
        rec.frame_index = t;
        rec.kind = sched.roles[t] == FrameRole::REFERENCE ? FrameKind::REFERENCE
                                                          : FrameKind::ANIMATED;
        if (rec.kind == FrameKind::ANIMATED) rec.ref_list = sched.refs[t];
        // closed loop: the predictor is the previously decoded (== encoded)
        // index vector, reset at every REFERENCE frame
        const bool fresh = rec.kind == FrameKind::REFERENCE;
        rec.payload = encode_payload(idx, fresh ? nullptr : &predictor);
        predictor = idx;
        stream.records.push_back(std::move(rec));
    }
    return stream;
}

// ---------------------------------------------------------------------------
// decoder: bitstream + reference frames only
// ---------------------------------------------------------------------------

struct DecodedKeypoints {
    std::vector<std::uint32_t> frame_indices;
    std::vector<KeypointSet> keypoints;  // dequantized, record order
    std::map<std::uint32_t, std::size_t> index_of;
};

inline DecodedKeypoints decode_keypoints(const Bitstream& stream) {
    const BitstreamHeader& h = stream.header;
    const std::size_t per = h.has_jacobians ? 6 : 2;
    const std::size_t count = h.num_keypoints * per;
    const double step = h.quant_step();

    DecodedKeypoints out;
    std::vector<std::int32_t> predictor;
    for (const FrameRecord& rec : stream.records) {
        const bool fresh = rec.kind == FrameKind::REFERENCE;
        const std::vector<std::int32_t> idx =
            decode_payload(rec.payload, fresh ? nullptr : &predictor, count);
        predictor = idx;
        out.index_of[rec.frame_index] = out.keypoints.size();
        out.frame_indices.push_back(rec.frame_index);
        out.keypoints.push_back(dequantize_keypoints(idx, step, h.num_keypoints,
                                                     h.has_jacobians, rec.frame_index));
    }
    return out;
}

struct Reconstruction {
    std::uint32_t frame_index = 0;
    Frame frame;
};

// Animates every ANIMATED record from the bitstream and the reference frame
// pixels alone; no encoder-side state is consulted.
inline std::vector<Reconstruction> decode_stream(
    const Bitstream& stream, const std::map<std::uint32_t, Frame>& reference_frames,
    const PipelineConfig& cfg, const FeatureExtractor& extractor = default_extractor(),
    const FrameGenerator& generator = default_generator()) {
    const BitstreamHeader& h = stream.header;
    const DecodedKeypoints dec = decode_keypoints(stream);

    std::map<std::uint32_t, Tensord> ref_features;
    for (const auto& [idx, frame] : reference_frames) ref_features[idx] = extractor(frame);

    std::vector<Reconstruction> out;
    for (const FrameRecord& rec : stream.records) {
        if (rec.kind != FrameKind::ANIMATED) continue;
        const KeypointSet& tgt_kp = dec.keypoints[dec.index_of.at(rec.frame_index)];

        std::vector<Tensord> deformed;
        std::vector<std::int64_t> ref_indices;
        std::size_t fh = 0, fw = 0;
        for (std::uint32_t r : rec.ref_list) {
            auto it = ref_features.find(r);
            if (it == ref_features.end())
                throw InvalidInputError("decode_stream missing reference frame " +
                                        std::to_string(r));
            const Tensord& feat = it->second;
            fh = feat.height();
            fw = feat.width();
            const KeypointSet& ref_kp = dec.keypoints[dec.index_of.at(r)];
            const DenseMotion motion = sparse_to_dense(ref_kp, tgt_kp, fh, fw, cfg.motion);
            deformed.push_back(apply_motion(feat, motion));
            ref_indices.push_back(r);
        }
        const WeightVector lambdas =
            temporal_weights(ref_indices, rec.frame_index, cfg.sigma());
        const AggregateResult agg = aggregate(deformed, lambdas);
        out.push_back({rec.frame_index, generator(agg.features, h.height, h.width)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// end-to-end run with metrics
// ---------------------------------------------------------------------------

struct FrameMetricsRow {
    std::uint32_t frame_index = 0;
    double psnr_db = 0.0;
    double ms_ssim = 0.0;
};

struct PipelineReport {
    std::vector<FrameMetricsRow> frames;  // one row per ANIMATED frame
    BitrateReport bitrate;
    GopConfig gop;
    std::uint8_t quant_log2 = 0;
    double wall_seconds = 0.0;  // reporting only; never serialized to CSV
    std::vector<Reconstruction> reconstructions;

    double mean_psnr() const {
        double s = 0.0;
        for (const auto& r : frames) s += r.psnr_db;
        return frames.empty() ? 0.0 : s / static_cast<double>(frames.size());
    }

    // Deterministic CSV: fixed column order and formatting.
    std::string metrics_csv() const {
        std::string csv = "frame_index,psnr_db,ms_ssim\n";
        char buf[96];
        for (const auto& r : frames) {
            std::snprintf(buf, sizeof(buf), "%u,%.6f,%.8f\n", r.frame_index, r.psnr_db,
                          r.ms_ssim);
            csv += buf;
        }
        return csv;
    }
};

inline PipelineReport run_pipeline(const Sequence& seq, const PipelineConfig& cfg,
                                   const FeatureExtractor& extractor = default_extractor(),
                                   const FrameGenerator& generator = default_generator()) {
    const auto t0 = std::chrono::steady_clock::now();
    const Bitstream stream = encode_sequence(seq, cfg);

    std::map<std::uint32_t, Frame> refs;
    for (const FrameRecord& rec : stream.records)
        if (rec.kind == FrameKind::REFERENCE) refs[rec.frame_index] = seq.frames[rec.frame_index];

    PipelineReport rep;
    rep.reconstructions = decode_stream(stream, refs, cfg, extractor, generator);
    for (const Reconstruction& rc : rep.reconstructions) {
        FrameMetricsRow row;
        row.frame_index = rc.frame_index;
        row.psnr_db = psnr(seq.frames[rc.frame_index], rc.frame);
        row.ms_ssim = cfg.compute_ms_ssim ? ms_ssim(seq.frames[rc.frame_index], rc.frame) : 0.0;
        rep.frames.push_back(row);
    }
    rep.bitrate = bitrate_report(stream, cfg.cost);
    rep.gop = cfg.gop;
    rep.quant_log2 = cfg.quant_log2;
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

// ---------------------------------------------------------------------------
// strategy ablation at matched bits
// ---------------------------------------------------------------------------

struct AblateRow {
    Strategy strategy = Strategy::RRB;
    double mean_quality_db = 0.0;
    double mean_kbps = 0.0;
    std::uint8_t quant_log2 = 0;
};

struct AblateResult {
    std::vector<AblateRow> rows;
    bool ordering_ok = false;  // RP_RRB >= RP >= RRB within the slack

    std::string csv() const {
        std::string out = "strategy,mean_psnr_db,mean_kbps,quant_log2\n";
        char buf[96];
        for (const AblateRow& r : rows) {
            std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%u\n", strategy_name(r.strategy),
                          r.mean_quality_db, r.mean_kbps, r.quant_log2);
            out += buf;
        }
        return out;
    }
};

// Runs the requested strategies over the seed list at bit budgets matched to
// the first strategy's spend (quant step adjusted per strategy, never finer
// than the budget allows).
inline AblateResult ablate_strategies(const std::vector<std::uint64_t>& seeds,
                                      const SynthConfig& synth_cfg,
                                      const PipelineConfig& base_cfg,
                                      const std::vector<Strategy>& strategies =
                                          {Strategy::RRB, Strategy::RP, Strategy::RP_RRB},
                                      double slack_db = 0.1) {
    if (seeds.size() < 5) throw InvalidInputError("ablate_strategies needs >= 5 seeds");

    std::vector<Sequence> sequences;
    sequences.reserve(seeds.size());
    for (std::uint64_t s : seeds) {
        SynthConfig sc = synth_cfg;
        sc.seed = s;
        sequences.push_back(synth_sequence(sc));
    }

    auto total_bits = [](const PipelineReport& r) { return r.bitrate.total_bits; };

    AblateResult res;
    std::vector<std::uint64_t> budgets;  // per seed, set by the first strategy
    for (std::size_t si = 0; si < strategies.size(); ++si) {
        PipelineConfig cfg = base_cfg;
        cfg.gop.strategy = strategies[si];
        cfg.compute_ms_ssim = false;

        AblateRow row;
        row.strategy = strategies[si];
        row.quant_log2 = cfg.quant_log2;
        for (std::size_t k = 0; k < sequences.size(); ++k) {
            PipelineConfig run_cfg = cfg;
            if (si > 0) {
                // coarsen the step until the budget of the anchor strategy fits
                std::uint8_t q = cfg.quant_log2;
                for (; q > 1; --q) {
                    run_cfg.quant_log2 = q;
                    if (total_bits(run_pipeline(sequences[k], run_cfg)) <= budgets[k]) break;
                }
                run_cfg.quant_log2 = q;
            }
            const PipelineReport rep = run_pipeline(sequences[k], run_cfg);
            if (si == 0) budgets.push_back(total_bits(rep));
            row.mean_quality_db += rep.mean_psnr();
            row.mean_kbps += rep.bitrate.kbps;
            row.quant_log2 = run_cfg.quant_log2;
        }
        row.mean_quality_db /= static_cast<double>(sequences.size());
        row.mean_kbps /= static_cast<double>(sequences.size());
        res.rows.push_back(row);
    }

    auto quality_of = [&](Strategy s) -> const double* {
        for (const AblateRow& r : res.rows)
            if (r.strategy == s) return &r.mean_quality_db;
        return nullptr;
    };
    const double* rrb = quality_of(Strategy::RRB);
    const double* rp = quality_of(Strategy::RP);
    const double* rp_rrb = quality_of(Strategy::RP_RRB);
    res.ordering_ok = true;
    if (rp && rrb) res.ordering_ok &= *rp >= *rrb - slack_db;
    if (rp_rrb && rp) res.ordering_ok &= *rp_rrb >= *rp - slack_db;
    return res;
}

// ---------------------------------------------------------------------------
// analytic MAC profile of the deterministic pipeline
// ---------------------------------------------------------------------------

// Counting model, multiply-accumulates per ANIMATED frame:
//   per reference branch (N of them)
//     extractor       4 MACs per output element  -> 4 C Hf Wf
//     dense motion    per pixel: K * (4 jacobian matvec + 2 distance
//                     + 1 exp + 1 normalize) + 1 background normalize
//                     + 2 (K+1) candidate blend  -> (10 K + 3) Hf Wf
//     occlusion       2 derivative taps + 1 scale + 1 exp -> 4 Hf Wf
//     warp            4 MACs per output element  -> 4 C Hf Wf
//     mask product    1 per element              -> C Hf Wf
//   shared
//     temporal weights  2 per reference          -> 2 N
//     aggregation       N scalings + (N-1)-way max -> (2 N - 1) C Hf Wf
//     generator         4 MACs per output element  -> 4 C H W
struct MacProfile {
    std::uint64_t total_macs = 0;  // per animated frame
    double macs_per_pixel = 0.0;
    std::uint64_t per_reference_macs = 0;
    std::uint64_t shared_macs = 0;
};

inline MacProfile mac_profile(std::size_t width, std::size_t height, std::size_t num_keypoints,
                              std::size_t num_refs, std::size_t channels = 3) {
    if (num_refs < 1) throw InvalidInputError("mac_profile needs N >= 1");
    const std::uint64_t hf = std::max<std::size_t>(1, height / 2);
    const std::uint64_t wf = std::max<std::size_t>(1, width / 2);
    const std::uint64_t fpx = hf * wf;
    const std::uint64_t c = channels;
    const std::uint64_t k = num_keypoints;
    const std::uint64_t n = num_refs;

    MacProfile p;
    p.per_reference_macs = 4 * c * fpx          // extractor
                           + (10 * k + 3) * fpx  // dense motion
                           + 4 * fpx             // occlusion
                           + 4 * c * fpx         // warp
                           + c * fpx;            // mask product
    p.shared_macs = 2 * n                        // temporal weights
                    + (2 * n - 1) * c * fpx      // aggregation
                    + 4 * c * static_cast<std::uint64_t>(width) * height;  // generator
    p.total_macs = n * p.per_reference_macs + p.shared_macs;
    p.macs_per_pixel =
        static_cast<double>(p.total_macs) / (static_cast<double>(width) * height);
    return p;
}

// ---------------------------------------------------------------------------
// toy gradient-descent demo on (kp_variance, beta, sigma)
// ---------------------------------------------------------------------------

struct ToySample {
    std::vector<Tensord> ref_features;
    std::vector<std::int64_t> ref_indices;
    std::vector<KeypointSet> ref_keypoints;
    KeypointSet target_keypoints;
    std::int64_t target_index = 0;
    Frame target;
};

struct ToyBatch {
    std::vector<ToySample> samples;
    std::size_t feat_h = 0, feat_w = 0;
    ContrastiveConfig contrastive;
};

// B samples drawn from several synthetic sequences: N random reference frames
// plus one target frame each, ground-truth keypoints (the codec path is not
// part of the training demo). Each sequence gets its own per-channel gain so
// batch samples are separable in pooled-feature space, standing in for the
// appearance differences between speakers.
inline ToyBatch make_toy_batch(const SynthConfig& base_cfg, std::size_t num_sequences,
                               std::size_t samples_per_seq, std::size_t refs_per_sample,
                               std::uint64_t seed) {
    if (refs_per_sample < 2)
        throw InvalidInputError("make_toy_batch needs >= 2 references per sample");
    SplitMix64 rng(seed ^ 0x746f79ULL);
    const FeatureExtractor extractor = default_extractor();

    ToyBatch batch;
    for (std::size_t s = 0; s < num_sequences; ++s) {
        SynthConfig sc = base_cfg;
        sc.seed = seed * 1000 + s;
        Sequence seq = synth_sequence(sc);
        const double gains[3] = {rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0),
                                 rng.uniform(0.2, 1.0)};
        for (Frame& f : seq.frames)
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t i = 0; i < f.height() * f.width(); ++i)
                    f.data()[c * f.height() * f.width() + i] *= gains[c];
        for (std::size_t i = 0; i < samples_per_seq; ++i) {
            ToySample sample;
            const std::uint32_t t_frames = static_cast<std::uint32_t>(seq.num_frames());
            const std::uint32_t tgt =
                1 + static_cast<std::uint32_t>(rng.next() % (t_frames - 1));
            sample.target_index = tgt;
            sample.target = seq.frames[tgt];
            sample.target_keypoints = seq.gt_keypoints[tgt];
            for (Keypoint& p : sample.target_keypoints.points) p.jacobian.reset();
            while (sample.ref_indices.size() < refs_per_sample) {
                const std::uint32_t r = static_cast<std::uint32_t>(rng.next() % t_frames);
                if (r == tgt) continue;
                bool dup = false;
                for (std::int64_t e : sample.ref_indices) dup |= e == r;
                if (dup) continue;
                sample.ref_indices.push_back(r);
                sample.ref_features.push_back(extractor(seq.frames[r]));
                KeypointSet kp = seq.gt_keypoints[r];
                for (Keypoint& p : kp.points) p.jacobian.reset();
                sample.ref_keypoints.push_back(std::move(kp));
            }
            batch.feat_h = sample.ref_features.front().height();
            batch.feat_w = sample.ref_features.front().width();
            batch.samples.push_back(std::move(sample));
        }
    }
    return batch;
}

struct CompositeLoss {
    double loss = 0.0;
    double recon_term = 0.0;
    double contrastive_term = 0.0;
    double d_kp_variance = 0.0;
    double d_beta = 0.0;
    double d_sigma = 0.0;
};

// Reconstruction MSE plus the multi-reference contrastive loss, with analytic
// gradients with respect to the three free motion/aggregation parameters.
inline CompositeLoss toy_composite_loss(const ToyBatch& batch, double kp_variance, double beta,
                                        double sigma, double w_bg = 0.01,
                                        bool want_grads = true) {
    if (batch.samples.empty()) throw InvalidInputError("toy batch is empty");
    const double b_n = static_cast<double>(batch.samples.size());
    const FrameGenerator generator = default_generator();

    SparseToDenseParams prm;
    prm.kp_variance = kp_variance;
    prm.w_bg = w_bg;
    prm.beta = beta;

    CompositeLoss out;
    std::vector<std::vector<PooledFeature>> pooled(batch.samples.size());

    struct SampleCache {
        std::vector<SparseToDenseResult> motion;
        std::vector<Tensord> deformed;
        WeightVector lambdas;
        AggregateResult agg;
        Frame recon;
    };
    std::vector<SampleCache> caches(batch.samples.size());

    for (std::size_t s = 0; s < batch.samples.size(); ++s) {
        const ToySample& smp = batch.samples[s];
        SampleCache& cache = caches[s];
        for (std::size_t r = 0; r < smp.ref_indices.size(); ++r) {
            cache.motion.push_back(sparse_to_dense_with_grad(
                smp.ref_keypoints[r], smp.target_keypoints, batch.feat_h, batch.feat_w, prm));
            cache.deformed.push_back(
                apply_motion(smp.ref_features[r], cache.motion.back().motion));
            pooled[s].push_back(pool_feature(cache.deformed.back()));
        }
        cache.lambdas = temporal_weights(smp.ref_indices, smp.target_index, sigma);
        cache.agg = aggregate(cache.deformed, cache.lambdas);
        cache.recon = generator(cache.agg.features, smp.target.height(), smp.target.width());

        double mse = 0.0;
        for (std::size_t i = 0; i < cache.recon.numel(); ++i) {
            const double d = cache.recon[i] - smp.target[i];
            mse += d * d;
        }
        out.recon_term += mse / static_cast<double>(cache.recon.numel()) / b_n;
    }

    const MultiRefContrastiveResult mc =
        multi_ref_contrastive(pooled, batch.contrastive, want_grads);
    out.contrastive_term = mc.loss;
    out.loss = out.recon_term + out.contrastive_term;
    if (!std::isfinite(out.loss)) throw DivergenceError("composite loss is not finite");
    if (!want_grads) return out;

    for (std::size_t s = 0; s < batch.samples.size(); ++s) {
        const ToySample& smp = batch.samples[s];
        SampleCache& cache = caches[s];

        Tensord d_recon(cache.recon.shape());
        const double scale = 2.0 / static_cast<double>(cache.recon.numel()) / b_n;
        for (std::size_t i = 0; i < d_recon.numel(); ++i)
            d_recon[i] = scale * (cache.recon[i] - smp.target[i]);
        const Tensord d_agg = bilinear_resize_backward(
            cache.agg.features, smp.target.height(), smp.target.width(), d_recon);

        const AggregateGrads ag =
            aggregate_backward(cache.deformed, cache.lambdas, cache.agg, d_agg);
        const std::vector<double> dl_dsigma =
            temporal_weights_sigma_grad(smp.ref_indices, smp.target_index, sigma);

        for (std::size_t r = 0; r < smp.ref_indices.size(); ++r) {
            Tensord d_deformed = ag.d_deformed[r];
            d_deformed += pool_feature_backward(
                {d_deformed.channels(), d_deformed.height(), d_deformed.width()},
                mc.d_features[s][r]);

            const ApplyMotionGrads am = apply_motion_backward(
                smp.ref_features[r], cache.motion[r].motion, d_deformed);

            // occlusion path: mask = exp(-beta |div(flow)|)
            const Tensord div = flow_divergence(cache.motion[r].motion.flow);
            const Tensord& mask = cache.motion[r].motion.occlusion;
            Tensord d_div({div.dim(0), div.dim(1)});
            for (std::size_t i = 0; i < div.numel(); ++i) {
                out.d_beta += am.d_mask[i] * (-std::abs(div[i]) * mask[i]);
                const double sign = div[i] > 0.0 ? 1.0 : (div[i] < 0.0 ? -1.0 : 0.0);
                d_div[i] = am.d_mask[i] * mask[i] * (-beta) * sign;
            }
            FlowFieldd d_flow =
                flow_divergence_adjoint(d_div, batch.feat_h, batch.feat_w);
            for (std::size_t i = 0; i < d_flow.xy.size(); ++i) d_flow.xy[i] += am.d_flow.xy[i];

            const FlowFieldd& dv = cache.motion[r].dflow_dvariance;
            for (std::size_t i = 0; i < d_flow.xy.size(); ++i)
                out.d_kp_variance += d_flow.xy[i] * dv.xy[i];

            out.d_sigma += ag.d_lambdas[r] * dl_dsigma[r];
        }
    }
    return out;
}

// The fixed training benchmark: oscillating 30-degree rotation on 32x32
// frames, four appearance-distinct sequences with one sample each (so every
// negative pair crosses sequences), two references per sample. kp_variance
// starts far too sharp so the descent has real work.
inline ToyBatch default_toy_benchmark(std::uint64_t seed = 21) {
    SynthConfig sc;
    sc.width = 32;
    sc.height = 32;
    sc.num_frames = 12;
    sc.waypoint_every = 6;
    ToyBatch batch = make_toy_batch(sc, 4, 1, 2, seed);
    batch.contrastive.tau = 0.02;
    return batch;
}

struct TrainToyResult {
    std::vector<double> loss_trace;  // steps + 1 entries, initial loss first
    double kp_variance = 0.0;
    double beta = 0.0;
    double sigma = 0.0;
};

// Plain projected gradient descent on the three parameters. lr = 0 leaves the
// trace constant by construction.
inline TrainToyResult train_toy(const ToyBatch& batch, int steps, double lr,
                                double init_kp_variance = 0.01, double init_beta = 5.0,
                                double init_sigma = 4.0, double w_bg = 0.01) {
    if (steps < 1) throw InvalidInputError("train_toy needs steps >= 1");
    TrainToyResult res;
    res.kp_variance = init_kp_variance;
    res.beta = init_beta;
    res.sigma = init_sigma;

    for (int step = 0; step <= steps; ++step) {
        CompositeLoss cl;
        try {
            cl = toy_composite_loss(batch, res.kp_variance, res.beta, res.sigma, w_bg,
                                    step < steps);
        } catch (const DivergenceError&) {
            throw DivergenceError("loss became non-finite at step " + std::to_string(step));
        }
        res.loss_trace.push_back(cl.loss);
        if (step == steps) break;
        res.kp_variance = std::max(1e-5, res.kp_variance - lr * cl.d_kp_variance);
        res.beta = std::max(0.0, res.beta - lr * cl.d_beta);
        res.sigma = std::max(1e-2, res.sigma - lr * cl.d_sigma);
    }
    return res;
}

}  // namespace mrdac
