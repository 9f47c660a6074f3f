#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "csda/dataset.hpp"
#include "csda/losses.hpp"
#include "csda/model.hpp"

namespace csda {

enum class Regime { synth_only, da, finetune, da_finetune, real_only };

const char* regime_name(Regime r);
Regime regime_from_name(const std::string& name);

struct TrainConfig {
    Regime regime = Regime::synth_only;
    int epochs = 40;
    int batch_size = 8;
    double lr = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double alpha = 1.0;
    // tempering exponent on the inverse-frequency class weights; 1 = raw
    // spec formula, 0.5 keeps majority classes trainable
    double class_weight_temper = 0.5;
    double grl_gamma = 10.0;
    double grl_lambda_max = 1.0;
    double finetune_lr_scale = 0.1;
    std::uint64_t seed = 0;
    bool augment = true;
    bool covariance_rescale = true;
    double val_fraction = 0.1;
    int classes = 6;
    std::array<int, 5> widths{16, 32, 64, 128, 256};
    std::uint64_t config_hash = 0;
    // finetune regimes start from this checkpoint
    std::filesystem::path init_checkpoint;
};

struct EpochLog {
    int epoch = 0;
    double seg_loss = 0;
    double da_loss = 0;
    std::array<double, 4> disc_accuracy{0, 0, 0, 0};
    double val_mean_iou = 0;
    double wall_s = 0;
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    std::int64_t real_label_reads = 0;  // audit counter captured at the end
    bool aborted_non_finite = false;
    double wall_clock_s = 0;

    void write_csv(const std::filesystem::path& path) const;
    void write_summary(const std::filesystem::path& path) const;
};

// lambda(p) = lambda_max * (2 / (1 + exp(-gamma p)) - 1), p in [0,1].
double grl_schedule(double progress, double gamma = 10.0, double lambda_max = 1.0);

// Adam with bias correction. Slot order is the parameter-store order.
template <class T>
class AdamOptimizer {
public:
    AdamOptimizer(ParamStore<T>& params, double lr, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);
    void step();
    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }

private:
    ParamStore<T>* params_;
    double lr_, beta1_, beta2_, eps_;
    int t_ = 0;
    std::vector<std::vector<T>> m_, v_;
};

template <class T>
struct TrainResult {
    SegModel<T> model;
    TrainLog log;
};

// Runs the configured regime. `synth` drives synth_only/da/da_finetune;
// `real` supplies the second domain (required for da/da_finetune/finetune/
// real_only). In da phases the trainer never touches real label rasters;
// the dataset's audit counter proves it. Deterministic for a fixed seed.
template <class T>
TrainResult<T> train(const TrainConfig& config, Dataset& synth, Dataset* real);

// Continues training from `model` with the segmentation loss on labeled
// real-domain samples at lr * finetune_lr_scale.
template <class T>
TrainLog finetune(SegModel<T>& model, Dataset& real_labeled, const TrainConfig& config);

// Per-class IoU averaged over samples plus GP distance of the most confident
// grasp prediction, over samples with at least one visible GT grasp pixel.
template <class T>
EvalReport evaluate(const SegModel<T>& model, const Dataset& test, EvalMode mode,
                    double cm_per_px, const std::string& regime_label);

// Trains the coordinate-regression baseline on samples with visible grasp
// points (MSE to the nearest GT point) and reports via the shared metric.
template <class T>
GraspRegressor<T> train_regression_baseline(Dataset& labeled, const TrainConfig& config);

template <class T>
EvalReport evaluate_regression(const GraspRegressor<T>& model, const Dataset& test,
                               double cm_per_px, const std::string& regime_label);

extern template class AdamOptimizer<float>;
extern template class AdamOptimizer<double>;
extern template TrainResult<float> train(const TrainConfig&, Dataset&, Dataset*);
extern template TrainResult<double> train(const TrainConfig&, Dataset&, Dataset*);
extern template TrainLog finetune(SegModel<float>&, Dataset&, const TrainConfig&);
extern template TrainLog finetune(SegModel<double>&, Dataset&, const TrainConfig&);
extern template EvalReport evaluate(const SegModel<float>&, const Dataset&, EvalMode, double,
                                    const std::string&);
extern template EvalReport evaluate(const SegModel<double>&, const Dataset&, EvalMode, double,
                                    const std::string&);
extern template GraspRegressor<float> train_regression_baseline(Dataset&, const TrainConfig&);
extern template GraspRegressor<double> train_regression_baseline(Dataset&, const TrainConfig&);
extern template EvalReport evaluate_regression(const GraspRegressor<float>&, const Dataset&,
                                               double, const std::string&);
extern template EvalReport evaluate_regression(const GraspRegressor<double>&, const Dataset&,
                                               double, const std::string&);

}  // namespace csda
