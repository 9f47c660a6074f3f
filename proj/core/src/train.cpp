#include "csda/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "csda/ops.hpp"
#include "csda/rng.hpp"

#if defined(__SSE2__)
#include <immintrin.h>
#endif

namespace csda {

namespace {

// Saturated softmax outputs drive activations into float denormals, which
// cost 10-100x on FMA units. Training and inference in float run with
// flush-to-zero / denormals-are-zero; the double path keeps full IEEE
// semantics (the gradient-check suites run there).
class DenormalGuard {
public:
    explicit DenormalGuard(bool enable) : enabled_(enable) {
#if defined(__SSE2__)
        if (enabled_) {
            csr_ = _mm_getcsr();
            _mm_setcsr(csr_ | 0x8040);  // FTZ | DAZ
        }
#endif
    }
    ~DenormalGuard() {
#if defined(__SSE2__)
        if (enabled_) _mm_setcsr(csr_);
#endif
    }

private:
    bool enabled_;
    unsigned csr_ = 0;
};

}  // namespace

const char* regime_name(Regime r) {
    switch (r) {
        case Regime::synth_only: return "synth_only";
        case Regime::da: return "da";
        case Regime::finetune: return "finetune";
        case Regime::da_finetune: return "da_finetune";
        default: return "real_only";
    }
}

Regime regime_from_name(const std::string& name) {
    for (Regime r : {Regime::synth_only, Regime::da, Regime::finetune, Regime::da_finetune,
                     Regime::real_only})
        if (name == regime_name(r)) return r;
    throw std::invalid_argument("unknown regime '" + name + "'");
}

double grl_schedule(double progress, double gamma, double lambda_max) {
    if (progress < 0.0 || progress > 1.0)
        throw std::invalid_argument("grl_schedule: progress must be in [0,1]");
    return lambda_max * (2.0 / (1.0 + std::exp(-gamma * progress)) - 1.0);
}

template <class T>
AdamOptimizer<T>::AdamOptimizer(ParamStore<T>& params, double lr, double beta1, double beta2,
                                double eps)
    : params_(&params), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i].assign(static_cast<std::size_t>(params.tensor(i).numel()), T(0));
        v_[i].assign(static_cast<std::size_t>(params.tensor(i).numel()), T(0));
    }
}

template <class T>
void AdamOptimizer<T>::step() {
    ++t_;
    const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_);
    const T one_b1 = static_cast<T>(1.0 - beta1_), one_b2 = static_cast<T>(1.0 - beta2_);
    const T inv_bc1 = static_cast<T>(1.0 / (1.0 - std::pow(beta1_, t_)));
    const T inv_bc2 = static_cast<T>(1.0 / (1.0 - std::pow(beta2_, t_)));
    const T lr = static_cast<T>(lr_), eps = static_cast<T>(eps_);
    for (std::size_t i = 0; i < params_->size(); ++i) {
        auto& p = params_->tensor(i);
        if (!p.has_grad()) continue;
        auto g = p.grad();
        T* w = p.data();
        T* m = m_[i].data();
        T* v = v_[i].data();
        const auto n = static_cast<std::int64_t>(g.size());
        for (std::int64_t k = 0; k < n; ++k) {
            const T gk = g[static_cast<std::size_t>(k)];
            const T mk = b1 * m[k] + one_b1 * gk;
            const T vk = b2 * v[k] + one_b2 * gk * gk;
            m[k] = mk;
            v[k] = vk;
            w[k] -= lr * (mk * inv_bc1) / (std::sqrt(vk * inv_bc2) + eps);
        }
    }
}

namespace {

// Preprocessing shared by training and evaluation: optional covariance
// rescale of synthetic samples toward the reference domain, then min-max
// normalization of the foreground.
DepthSample preprocess(const DepthSample& s, double cov_sv, double cov_sh) {
    if (s.domain == Domain::synthetic && (cov_sv != 1.0 || cov_sh != 1.0))
        return minmax_normalize(rescale(s, cov_sv, cov_sh));
    return minmax_normalize(s);
}

template <class T>
Tensor<T> batch_tensor(const std::vector<const DepthSample*>& items) {
    const int n = static_cast<int>(items.size());
    const int h = items[0]->height, w = items[0]->width;
    Tensor<T> x = Tensor<T>::zeros({n, 1, h, w});
    T* p = x.data();
    for (int i = 0; i < n; ++i) {
        const auto& d = items[static_cast<std::size_t>(i)]->depth;
        for (std::size_t k = 0; k < d.size(); ++k)
            p[static_cast<std::size_t>(i) * d.size() + k] = static_cast<T>(d[k]);
    }
    return x;
}

template <class T>
std::vector<std::uint8_t> argmax_raster(const Tensor<T>& probs, int item) {
    const int c = probs.dim(1);
    const std::int64_t hw = static_cast<std::int64_t>(probs.dim(2)) * probs.dim(3);
    std::vector<std::uint8_t> out(static_cast<std::size_t>(hw));
    const T* p = probs.data() + static_cast<std::int64_t>(item) * c * hw;
    for (std::int64_t px = 0; px < hw; ++px) {
        int best = 0;
        T bv = p[px];
        for (int ic = 1; ic < c; ++ic)
            if (p[ic * hw + px] > bv) {
                bv = p[ic * hw + px];
                best = ic;
            }
        out[static_cast<std::size_t>(px)] = static_cast<std::uint8_t>(best);
    }
    return out;
}

std::vector<PixelPoint> grasp_points_of(const std::vector<std::uint8_t>& labels, int h, int w) {
    std::vector<PixelPoint> pts;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            if (labels[static_cast<std::size_t>(r) * w + c] == 5) pts.push_back({r, c});
    return pts;
}

// merged-edges view: top/middle/bottom collapse to one edge class
std::vector<std::uint8_t> merge_edges(const std::vector<std::uint8_t>& labels) {
    std::vector<std::uint8_t> out = labels;
    for (auto& l : out)
        if (l == 3 || l == 4) l = 2;
    return out;
}

}  // namespace

void TrainLog::write_csv(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("trainlog: cannot open " + path.string());
    os << "epoch,seg_loss,da_loss,disc1_acc,disc2_acc,disc3_acc,disc4_acc,val_mean_iou,wall_s\n";
    for (const auto& e : epochs) {
        os << e.epoch << "," << e.seg_loss << "," << e.da_loss;
        for (double a : e.disc_accuracy) os << "," << a;
        os << "," << e.val_mean_iou << "," << e.wall_s << "\n";
    }
}

void TrainLog::write_summary(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("trainlog: cannot open " + path.string());
    os << "epochs=" << epochs.size() << "\n";
    if (!epochs.empty()) {
        os << "final_seg_loss=" << epochs.back().seg_loss << "\n";
        os << "final_da_loss=" << epochs.back().da_loss << "\n";
        os << "final_val_mean_iou=" << epochs.back().val_mean_iou << "\n";
    }
    os << "real_label_reads=" << real_label_reads << "\n";
    os << "aborted_non_finite=" << (aborted_non_finite ? 1 : 0) << "\n";
    os << "wall_clock_s=" << wall_clock_s << "\n";
}

namespace {

struct Phase {
    bool use_da = false;  // mixed batches + discriminator loss
    int epochs = 1;
    double lr = 1e-3;
};

struct PhaseData {
    // preprocessed copies; labels are only read through Dataset::labels_of
    // so the audit counter sees every access
    Dataset* seg_set = nullptr;   // the set the segmentation loss trains on
    Dataset* da_real = nullptr;   // label-stripped second domain for the DA branch
};

// Replaces the class raster with the binary foreground mask computed from
// the depth raster. The DA regimes feed the trainer through this, so real
// annotations are unreadable there by construction.
void strip_labels(Dataset& ds) {
    for (auto& s : ds.samples())
        for (std::size_t i = 0; i < s.labels.size(); ++i)
            s.labels[i] = s.depth[i] != 0.0f ? 1 : 0;
}

template <class T>
void run_phase(SegModel<T>& model, AdamOptimizer<T>& opt, const TrainConfig& cfg,
               const Phase& phase, PhaseData& data, TrainLog& log, Rng& shuffle_rng,
               std::vector<double>& weights) {
    opt.set_lr(phase.lr);
    Dataset& seg_set = *data.seg_set;
    const auto n_seg = seg_set.size();
    if (n_seg == 0) throw std::invalid_argument("train: empty training set");
    const int seg_bs = phase.use_da ? std::max(1, cfg.batch_size / 2) : cfg.batch_size;
    const auto steps_per_epoch =
        static_cast<std::int64_t>((n_seg + static_cast<std::size_t>(seg_bs) - 1) /
                                  static_cast<std::size_t>(seg_bs));
    const std::int64_t total_steps = steps_per_epoch * phase.epochs;

    std::vector<std::size_t> order(n_seg);
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::size_t> real_order;
    if (phase.use_da) {
        real_order.resize(data.da_real->size());
        std::iota(real_order.begin(), real_order.end(), 0);
    }
    std::size_t real_cursor = 0;

    std::vector<std::vector<T>> snapshot;
    auto take_snapshot = [&]() {
        snapshot.clear();
        for (std::size_t i = 0; i < model.params().size(); ++i) {
            auto vals = model.params().tensor(i).values();
            snapshot.emplace_back(vals.begin(), vals.end());
        }
    };
    auto restore_snapshot = [&]() {
        for (std::size_t i = 0; i < model.params().size(); ++i)
            std::copy(snapshot[i].begin(), snapshot[i].end(),
                      model.params().tensor(i).data());
    };
    take_snapshot();

    std::int64_t global_step = log.epochs.empty()
                                   ? 0
                                   : static_cast<std::int64_t>(log.epochs.size()) *
                                         steps_per_epoch;
    const auto t_start = std::chrono::steady_clock::now();

    for (int epoch = 0; epoch < phase.epochs; ++epoch) {
        // seeded shuffles keep runs reproducible
        for (std::size_t i = n_seg - 1; i > 0; --i)
            std::swap(order[i], order[static_cast<std::size_t>(shuffle_rng.uniform_index(i + 1))]);
        if (phase.use_da && real_order.size() > 1)
            for (std::size_t i = real_order.size() - 1; i > 0; --i)
                std::swap(real_order[i],
                          real_order[static_cast<std::size_t>(shuffle_rng.uniform_index(i + 1))]);

        double seg_acc = 0, da_acc = 0;
        std::array<double, 4> disc_hits{0, 0, 0, 0};
        std::int64_t disc_total = 0;
        std::int64_t seg_batches = 0;

        for (std::size_t start = 0; start < n_seg; start += static_cast<std::size_t>(seg_bs)) {
            const std::size_t end = std::min(n_seg, start + static_cast<std::size_t>(seg_bs));
            Tape<T> tape;
            // --- segmentation half ---
            std::vector<DepthSample> holders;
            std::vector<const DepthSample*> items;
            std::vector<const std::vector<std::uint8_t>*> rasters;
            holders.reserve(end - start);
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t idx = order[k];
                const auto& base = seg_set.sample(idx);
                if (cfg.augment) {
                    holders.push_back(augment(
                        base, {},
                        derive_seed(cfg.seed, 0x626174ull, static_cast<std::uint64_t>(global_step),
                                    static_cast<std::uint64_t>(k))));
                } else {
                    holders.push_back(base);
                }
                // label access goes through the audited channel
                (void)seg_set.labels_of(idx);
                rasters.push_back(&holders.back().labels);
            }
            for (const auto& h : holders) items.push_back(&h);
            auto x = batch_tensor<T>(items);
            auto fwd = model.forward_segment(tape, x);
            auto gt = one_hot_labels<T>(rasters, items[0]->height, items[0]->width,
                                        cfg.classes);
            auto seg = soft_iou_loss(tape, fwd.probs, gt, weights);

            Tensor<T> loss;
            if (phase.use_da) {
                // --- unlabeled real half: encoder + discriminators only ---
                const auto& real = *data.da_real;
                std::vector<const DepthSample*> ritems;
                std::vector<DepthSample> rholders;
                const int rbs = std::max(1, cfg.batch_size - seg_bs);
                rholders.reserve(static_cast<std::size_t>(rbs));
                for (int k = 0; k < rbs; ++k) {
                    const std::size_t idx = real_order[real_cursor % real_order.size()];
                    ++real_cursor;
                    const auto& base = real.sample(idx);
                    if (cfg.augment) {
                        rholders.push_back(
                            augment(base, {},
                                    derive_seed(cfg.seed, 0x726274ull,
                                                static_cast<std::uint64_t>(global_step),
                                                static_cast<std::uint64_t>(k))));
                    } else {
                        rholders.push_back(base);
                    }
                }
                for (const auto& h : rholders) ritems.push_back(&h);
                auto xr = batch_tensor<T>(ritems);
                auto fr = model.forward_encoder(tape, xr);

                const double progress =
                    total_steps > 1
                        ? static_cast<double>(global_step) / static_cast<double>(total_steps - 1)
                        : 1.0;
                const T lambda = static_cast<T>(std::min(
                    grl_schedule(std::min(1.0, progress), cfg.grl_gamma, cfg.grl_lambda_max),
                    cfg.grl_lambda_max));
                auto ps = model.forward_domain(tape, fwd.encoder_features, lambda);
                auto pr = model.forward_domain(tape, fr, lambda);
                const std::vector<int> ys(items.size(), 0);
                const std::vector<int> yr(ritems.size(), 1);
                auto da_s = da_loss(tape, {ps.begin(), ps.end()}, ys);
                auto da_r = da_loss(tape, {pr.begin(), pr.end()}, yr);
                auto da = scale(tape, add(tape, da_s, da_r), static_cast<T>(0.5));
                loss = total_loss<T>(tape, &seg, da, static_cast<T>(cfg.alpha));
                da_acc += da.scalar();
                for (int b = 0; b < 4; ++b) {
                    for (std::int64_t i = 0; i < ps[b].numel(); ++i)
                        disc_hits[static_cast<std::size_t>(b)] += ps[b].values()[i] <= T(0.5);
                    for (std::int64_t i = 0; i < pr[b].numel(); ++i)
                        disc_hits[static_cast<std::size_t>(b)] += pr[b].values()[i] > T(0.5);
                }
                disc_total += static_cast<std::int64_t>(items.size() + ritems.size());
            } else {
                loss = scale(tape, seg, static_cast<T>(cfg.alpha));
            }
            seg_acc += seg.scalar();
            ++seg_batches;

            if (!std::isfinite(static_cast<double>(loss.scalar()))) {
                restore_snapshot();
                log.aborted_non_finite = true;
                return;
            }
            model.params().zero_grads();
            tape.backward(loss);
            opt.step();
            ++global_step;
        }

        EpochLog el;
        el.epoch = static_cast<int>(log.epochs.size());
        el.seg_loss = seg_acc / static_cast<double>(seg_batches);
        el.da_loss = phase.use_da ? da_acc / static_cast<double>(seg_batches) : 0.0;
        for (int b = 0; b < 4; ++b)
            el.disc_accuracy[static_cast<std::size_t>(b)] =
                disc_total ? disc_hits[static_cast<std::size_t>(b)] /
                                 static_cast<double>(disc_total)
                           : 0.0;
        // train-subset IoU snapshot, no augmentation
        {
            Tape<T> tape(false);
            const std::size_t n_val = std::min<std::size_t>(16, n_seg);
            std::vector<const DepthSample*> vitems;
            for (std::size_t i = 0; i < n_val; ++i) vitems.push_back(&seg_set.sample(i));
            auto x = batch_tensor<T>(vitems);
            auto fwd = model.forward_segment(tape, x);
            double miou = 0;
            for (std::size_t i = 0; i < n_val; ++i) {
                const auto pred = argmax_raster(fwd.probs, static_cast<int>(i));
                const auto& gt = seg_set.labels_of(i);
                double iou = 0;
                for (int c = 0; c < cfg.classes; ++c)
                    iou += iou_metric(pred, gt, static_cast<std::uint8_t>(c));
                miou += iou / cfg.classes;
            }
            el.val_mean_iou = miou / static_cast<double>(n_val);
        }
        el.wall_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        log.epochs.push_back(el);
        take_snapshot();
    }
}

template <class T>
std::vector<double> seg_class_weights(Dataset& ds, int classes, double temper) {
    std::vector<std::int64_t> counts(static_cast<std::size_t>(classes), 0);
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::uint8_t l : ds.labels_of(i)) counts[l]++;
    auto w = class_weights(counts);
    // raw inverse frequency spans ~400:1 between background and grasp
    // pixels, which starves the majority classes of gradient; tempering
    // narrows the span while keeping the imbalance correction
    double mean = 0;
    for (auto& v : w) {
        v = std::pow(v, temper);
        mean += v;
    }
    mean /= static_cast<double>(w.size());
    for (auto& v : w) v /= mean;
    return w;
}

// preprocessed working copies; the original datasets stay untouched
void preprocess_inplace(Dataset& ds, double cov_sv, double cov_sh) {
    for (auto& s : ds.samples()) s = preprocess(s, cov_sv, cov_sh);
}

}  // namespace

template <class T>
TrainResult<T> train(const TrainConfig& cfg, Dataset& synth, Dataset* real) {
    const bool needs_real = cfg.regime != Regime::synth_only;
    if (needs_real && (!real || real->empty()))
        throw std::invalid_argument(std::string("train: regime ") + regime_name(cfg.regime) +
                                    " requires a real-domain dataset");
    if ((cfg.regime == Regime::synth_only || cfg.regime == Regime::da ||
         cfg.regime == Regime::da_finetune) &&
        synth.empty())
        throw std::invalid_argument(std::string("train: regime ") + regime_name(cfg.regime) +
                                    " requires a synthetic dataset");
    if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");

    const DenormalGuard ftz(std::is_same_v<T, float>);
    const auto t0 = std::chrono::steady_clock::now();
    TrainResult<T> result;
    if (cfg.regime == Regime::finetune) {
        if (cfg.init_checkpoint.empty())
            throw std::invalid_argument("train: finetune requires an initial checkpoint");
        result.model = SegModel<T>::load(cfg.init_checkpoint);
        if (result.model.meta().classes != cfg.classes ||
            result.model.meta().widths != cfg.widths)
            throw std::invalid_argument(
                "train: checkpoint classes/widths do not match the configuration");
    } else {
        result.model = SegModel<T>::build(cfg.classes, cfg.widths, cfg.seed);
    }
    result.model.meta().config_hash = cfg.config_hash;

    // covariance rescale of the synthetic domain toward the surrogate-real
    // reference, as dataset preprocessing (train-split statistics only)
    double cov_sv = 1.0, cov_sh = 1.0;
    const bool use_synth =
        cfg.regime == Regime::synth_only || cfg.regime == Regime::da ||
        cfg.regime == Regime::da_finetune;
    if (cfg.covariance_rescale && use_synth && real && !real->empty()) {
        std::tie(cov_sv, cov_sh) = covariance_scale_factors(synth.samples(), real->samples());
        result.model.meta().cov_scale_v = cov_sv;
        result.model.meta().cov_scale_h = cov_sh;
    }

    synth.reset_label_audit();
    if (real) real->reset_label_audit();

    Dataset synth_prep = synth;
    Dataset real_prep;
    if (real) real_prep = *real;
    // the DA branch sees real samples with class rasters replaced by the
    // depth-derived foreground mask
    Dataset real_stripped;
    if (real && (cfg.regime == Regime::da || cfg.regime == Regime::da_finetune)) {
        real_stripped = *real;
        strip_labels(real_stripped);
        preprocess_inplace(real_stripped, 1.0, 1.0);
        real_stripped.reset_label_audit();
    }
    preprocess_inplace(synth_prep, cov_sv, cov_sh);
    preprocess_inplace(real_prep, 1.0, 1.0);
    synth_prep.reset_label_audit();
    real_prep.reset_label_audit();

    AdamOptimizer<T> opt(result.model.params(), cfg.lr, cfg.adam_beta1, cfg.adam_beta2);
    Rng shuffle_rng(derive_seed(cfg.seed, 0x73687566ull /*shuf*/));

    PhaseData data;
    Phase phase;
    phase.lr = cfg.lr;
    phase.epochs = cfg.epochs;

    switch (cfg.regime) {
        case Regime::synth_only: {
            auto weights = seg_class_weights<T>(synth_prep, cfg.classes, cfg.class_weight_temper);
            data.seg_set = &synth_prep;
            run_phase(result.model, opt, cfg, phase, data, result.log, shuffle_rng, weights);
            break;
        }
        case Regime::da: {
            auto weights = seg_class_weights<T>(synth_prep, cfg.classes, cfg.class_weight_temper);
            data.seg_set = &synth_prep;
            data.da_real = &real_stripped;
            phase.use_da = true;
            run_phase(result.model, opt, cfg, phase, data, result.log, shuffle_rng, weights);
            break;
        }
        case Regime::da_finetune: {
            auto weights = seg_class_weights<T>(synth_prep, cfg.classes, cfg.class_weight_temper);
            data.seg_set = &synth_prep;
            data.da_real = &real_stripped;
            phase.use_da = true;
            run_phase(result.model, opt, cfg, phase, data, result.log, shuffle_rng, weights);
            // finetune phase consumes real labels at a reduced rate
            auto ft_weights = seg_class_weights<T>(real_prep, cfg.classes, cfg.class_weight_temper);
            Phase ft;
            ft.epochs = cfg.epochs;
            ft.lr = cfg.lr * cfg.finetune_lr_scale;
            PhaseData ft_data;
            ft_data.seg_set = &real_prep;
            run_phase(result.model, opt, cfg, ft, ft_data, result.log, shuffle_rng, ft_weights);
            break;
        }
        case Regime::finetune:
        case Regime::real_only: {
            auto weights = seg_class_weights<T>(real_prep, cfg.classes, cfg.class_weight_temper);
            data.seg_set = &real_prep;
            phase.lr = cfg.regime == Regime::finetune ? cfg.lr * cfg.finetune_lr_scale : cfg.lr;
            run_phase(result.model, opt, cfg, phase, data, result.log, shuffle_rng, weights);
            break;
        }
    }

    result.log.real_label_reads = real_prep.label_reads(Domain::surrogate_real) +
                                  real_stripped.label_reads(Domain::surrogate_real) +
                                  synth_prep.label_reads(Domain::surrogate_real);
    result.log.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (cfg.regime == Regime::da && result.log.real_label_reads != 0)
        throw std::logic_error("train: da regime read real-domain labels");
    return result;
}

template <class T>
TrainLog finetune(SegModel<T>& model, Dataset& real_labeled, const TrainConfig& cfg) {
    const DenormalGuard ftz(std::is_same_v<T, float>);
    TrainLog log;
    if (cfg.epochs == 0) return log;  // explicit no-op
    if (real_labeled.empty())
        throw std::invalid_argument("finetune: real labeled dataset is empty");
    const auto t0 = std::chrono::steady_clock::now();
    Dataset prep = real_labeled;
    preprocess_inplace(prep, 1.0, 1.0);
    prep.reset_label_audit();
    auto weights = seg_class_weights<T>(prep, cfg.classes, cfg.class_weight_temper);
    AdamOptimizer<T> opt(model.params(), cfg.lr * cfg.finetune_lr_scale, cfg.adam_beta1,
                         cfg.adam_beta2);
    Rng shuffle_rng(derive_seed(cfg.seed, 0x66746e65ull /*ftne*/));
    Phase phase;
    phase.epochs = cfg.epochs;
    phase.lr = cfg.lr * cfg.finetune_lr_scale;
    PhaseData data;
    data.seg_set = &prep;
    run_phase(model, opt, cfg, phase, data, log, shuffle_rng, weights);
    log.real_label_reads = prep.label_reads(Domain::surrogate_real);
    log.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return log;
}

template <class T>
EvalReport evaluate(const SegModel<T>& model, const Dataset& test, EvalMode mode,
                    double cm_per_px, const std::string& regime_label) {
    if (test.empty()) throw std::invalid_argument("evaluate: empty test set");
    const DenormalGuard ftz(std::is_same_v<T, float>);
    EvalReport rep;
    rep.regime = regime_label;
    rep.mode = mode;
    const double cov_sv = model.meta().cov_scale_v;
    const double cov_sh = model.meta().cov_scale_h;

    double bg = 0, body = 0, top = 0, middle = 0, bottom = 0, edges = 0;
    double gp_px_acc = 0, gp_cm_acc = 0;
    std::int64_t gp_n = 0;
    const std::size_t n = test.size();
    constexpr std::size_t kBatch = 8;

    for (std::size_t start = 0; start < n; start += kBatch) {
        const std::size_t end = std::min(n, start + kBatch);
        std::vector<DepthSample> prepped;
        std::vector<const DepthSample*> items;
        prepped.reserve(end - start);
        for (std::size_t i = start; i < end; ++i)
            prepped.push_back(preprocess(test.sample(i), cov_sv, cov_sh));
        for (const auto& p : prepped) items.push_back(&p);
        Tape<T> tape(false);
        auto x = batch_tensor<T>(items);
        auto fwd = model.forward_segment(tape, x);
        auto grasp = predict_grasp_point(fwd.probs);
        for (std::size_t i = 0; i < items.size(); ++i) {
            const auto pred = argmax_raster(fwd.probs, static_cast<int>(i));
            const auto& gt = prepped[i].labels;
            bg += iou_metric(pred, gt, 0);
            body += iou_metric(pred, gt, 1);
            if (mode == EvalMode::fine_grained) {
                top += iou_metric(pred, gt, 2);
                middle += iou_metric(pred, gt, 3);
                bottom += iou_metric(pred, gt, 4);
            } else {
                edges += iou_metric(merge_edges(pred), merge_edges(gt), 2);
            }
            const auto gt_pts = grasp_points_of(gt, prepped[i].height, prepped[i].width);
            if (!gt_pts.empty()) {
                const auto [dpx, dcm] = gp_distance(
                    {grasp[i].row, grasp[i].col}, gt_pts, cm_per_px);
                gp_px_acc += dpx;
                gp_cm_acc += dcm;
                ++gp_n;
            }
        }
    }
    const auto dn = static_cast<double>(n);
    rep.background_iou = bg / dn;
    rep.body_iou = body / dn;
    rep.top_iou = top / dn;
    rep.middle_iou = middle / dn;
    rep.bottom_iou = bottom / dn;
    rep.edges_iou = edges / dn;
    rep.gp_px = gp_n ? gp_px_acc / static_cast<double>(gp_n) : 0.0;
    rep.gp_cm = gp_n ? gp_cm_acc / static_cast<double>(gp_n) : 0.0;
    rep.n = gp_n;
    return rep;
}

template <class T>
GraspRegressor<T> train_regression_baseline(Dataset& labeled, const TrainConfig& cfg) {
    const DenormalGuard ftz(std::is_same_v<T, float>);
    Dataset prep = labeled;
    preprocess_inplace(prep, 1.0, 1.0);
    // only samples with at least one visible grasp pixel carry a target
    std::vector<std::size_t> usable;
    std::vector<std::vector<PixelPoint>> targets;
    for (std::size_t i = 0; i < prep.size(); ++i) {
        auto pts = grasp_points_of(prep.labels_of(i), prep.sample(i).height,
                                   prep.sample(i).width);
        if (!pts.empty()) {
            usable.push_back(i);
            targets.push_back(std::move(pts));
        }
    }
    if (usable.empty())
        throw std::invalid_argument("train_regression_baseline: no samples with grasp points");

    auto model = GraspRegressor<T>::build(cfg.widths, cfg.seed);
    AdamOptimizer<T> opt(model.params(), cfg.lr, cfg.adam_beta1, cfg.adam_beta2);
    Rng shuffle_rng(derive_seed(cfg.seed, 0x72677368ull /*rgsh*/));
    std::vector<std::size_t> order(usable.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size() - 1; i > 0; --i)
            std::swap(order[i], order[static_cast<std::size_t>(shuffle_rng.uniform_index(i + 1))]);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<const DepthSample*> items;
            for (std::size_t k = start; k < end; ++k)
                items.push_back(&prep.sample(usable[order[k]]));
            Tape<T> tape;
            auto x = batch_tensor<T>(items);
            auto out = model.forward(tape, x);
            // target: the GT grasp point nearest to the current prediction
            auto tgt = Tensor<T>::zeros({static_cast<int>(items.size()), 2});
            for (std::size_t k = start; k < end; ++k) {
                const auto& pts = targets[order[k]];
                const double pr = out.data()[(k - start) * 2];
                const double pc = out.data()[(k - start) * 2 + 1];
                double best = 1e30;
                PixelPoint bp = pts[0];
                for (const auto& p : pts) {
                    const double d = (p.row - pr) * (p.row - pr) + (p.col - pc) * (p.col - pc);
                    if (d < best) {
                        best = d;
                        bp = p;
                    }
                }
                tgt.data()[(k - start) * 2] = static_cast<T>(bp.row);
                tgt.data()[(k - start) * 2 + 1] = static_cast<T>(bp.col);
            }
            auto loss = mse_loss(tape, out, tgt);
            if (!std::isfinite(static_cast<double>(loss.scalar()))) break;
            model.params().zero_grads();
            tape.backward(loss);
            opt.step();
        }
    }
    return model;
}

template <class T>
EvalReport evaluate_regression(const GraspRegressor<T>& model, const Dataset& test,
                               double cm_per_px, const std::string& regime_label) {
    if (test.empty()) throw std::invalid_argument("evaluate_regression: empty test set");
    EvalReport rep;
    rep.regime = regime_label;
    rep.mode = EvalMode::merged_edges;
    double px_acc = 0, cm_acc = 0;
    std::int64_t gp_n = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto prepped = preprocess(test.sample(i), 1.0, 1.0);
        const auto pts = grasp_points_of(prepped.labels, prepped.height, prepped.width);
        if (pts.empty()) continue;
        Tape<T> tape(false);
        auto x = batch_tensor<T>({&prepped});
        auto out = model.forward(tape, x);
        const PixelPoint pred{static_cast<int>(std::lround(static_cast<double>(out.data()[0]))),
                              static_cast<int>(std::lround(static_cast<double>(out.data()[1])))};
        const auto [dpx, dcm] = gp_distance(pred, pts, cm_per_px);
        px_acc += dpx;
        cm_acc += dcm;
        ++gp_n;
    }
    rep.gp_px = gp_n ? px_acc / static_cast<double>(gp_n) : 0.0;
    rep.gp_cm = gp_n ? cm_acc / static_cast<double>(gp_n) : 0.0;
    rep.n = gp_n;
    return rep;
}

template class AdamOptimizer<float>;
template class AdamOptimizer<double>;
template TrainResult<float> train(const TrainConfig&, Dataset&, Dataset*);
template TrainResult<double> train(const TrainConfig&, Dataset&, Dataset*);
template TrainLog finetune(SegModel<float>&, Dataset&, const TrainConfig&);
template TrainLog finetune(SegModel<double>&, Dataset&, const TrainConfig&);
template EvalReport evaluate(const SegModel<float>&, const Dataset&, EvalMode, double,
                             const std::string&);
template EvalReport evaluate(const SegModel<double>&, const Dataset&, EvalMode, double,
                             const std::string&);
template GraspRegressor<float> train_regression_baseline(Dataset&, const TrainConfig&);
template GraspRegressor<double> train_regression_baseline(Dataset&, const TrainConfig&);
template EvalReport evaluate_regression(const GraspRegressor<float>&, const Dataset&, double,
                                        const std::string&);
template EvalReport evaluate_regression(const GraspRegressor<double>&, const Dataset&, double,
                                        const std::string&);

}  // namespace csda
