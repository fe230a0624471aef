#pragma once

#include "frvs/lightfield.hpp"
#include "frvs/model.hpp"

namespace frvs {

struct LossConfig {
    float alpha = 0.001f;  // TV weight

    void validate() const { require(alpha >= 0.0f, "loss: alpha must be nonnegative"); }
};

struct LossReport {
    double l1 = 0.0;
    double tv = 0.0;
    double total = 0.0;
};

// C = L1(pred, target) + alpha * TV(flow). L1 is a mean over pixels and
// channels; the report carries both terms separately.
std::pair<NodePtr, LossReport> loss(const NodePtr& pred, const Tensor& target,
                                    const NodePtr& flow, const LossConfig& cfg);

struct OptimConfig {
    float learning_rate = 1e-4f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float epsilon = 1e-8f;
    int batch_size = 4;
    int iterations = 12000;
    unsigned seed = 1;

    void validate() const {
        require(learning_rate > 0.0f || learning_rate == 0.0f, "optim: bad learning rate");
        require(beta1 >= 0.0f && beta1 < 1.0f && beta2 >= 0.0f && beta2 < 1.0f,
                "optim: betas must be in [0,1)");
        require(batch_size >= 1 && iterations >= 0, "optim: bad batch size or iterations");
    }
};

struct AdamState {
    std::map<std::string, std::pair<Tensor, Tensor>> moments;  // first, second
    long step = 0;
};

// Bias-corrected Adam update in deterministic (lexicographic) parameter
// order; errors if any trainable parameter is missing its gradient.
void adam_step(ModelParams& params, AdamState& state, const OptimConfig& cfg);

struct TrainOptions {
    LossConfig loss;
    OptimConfig optim;
    int crop_h = 240;  // 0 disables cropping
    int crop_w = 320;
    float max_disp = 10.0f;
    int checkpoint_every = 0;  // 0 = only final
    std::string checkpoint_path;  // empty = no checkpoints written
    std::string log_csv_path;     // empty = no CSV
    bool resume = false;          // continue from checkpoint_path + ".state"
};

struct TrainResult {
    ModelParams params;
    std::vector<LossReport> log;  // one entry per iteration
};

// sample batch -> synthesize -> loss -> backward -> adam -> zero_grad.
// Fully deterministic under the seed; aborts with diagnostics on NaN loss.
TrainResult train(ModelVariant variant, const std::vector<LightField>& dataset,
                  const TrainOptions& opts);

}  // namespace frvs
