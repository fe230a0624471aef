#include "frvs/trainer.hpp"

#include <chrono>
#include <cstring>
#include <fstream>
#include <sstream>

#include "frvs/checkpoint.hpp"

namespace frvs {

std::pair<NodePtr, LossReport> loss(const NodePtr& pred, const Tensor& target,
                                    const NodePtr& flow, const LossConfig& cfg) {
    cfg.validate();
    require(pred->value.same_shape(target), "loss: prediction/target shape mismatch " +
                                                pred->value.shape_str() + " vs " +
                                                Tensor(target).shape_str());
    auto l1 = mean(abs_op(sub(pred, make_const(target))));
    auto tv = tv_loss(flow);
    auto total = add(l1, scale(tv, cfg.alpha));
    LossReport report{l1->value.data[0], tv->value.data[0], total->value.data[0]};
    return {total, report};
}

void adam_step(ModelParams& params, AdamState& state, const OptimConfig& cfg) {
    cfg.validate();
    ++state.step;
    const float b1t = 1.0f - std::pow(cfg.beta1, static_cast<float>(state.step));
    const float b2t = 1.0f - std::pow(cfg.beta2, static_cast<float>(state.step));
    for (auto& [name, node] : params.store.params) {
        require(!node->grad.data.empty(), "adam_step: missing gradient for " + name);
        auto& [m, v] = state.moments.try_emplace(name, Tensor::zeros(node->value.shape),
                                                 Tensor::zeros(node->value.shape))
                           .first->second;
        for (std::size_t i = 0; i < node->value.numel(); ++i) {
            const float g = node->grad.data[i];
            m.data[i] = cfg.beta1 * m.data[i] + (1.0f - cfg.beta1) * g;
            v.data[i] = cfg.beta2 * v.data[i] + (1.0f - cfg.beta2) * g * g;
            const float mhat = m.data[i] / b1t;
            const float vhat = v.data[i] / b2t;
            node->value.data[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
    }
}

namespace {

// Optimizer/RNG sidecar so a resumed run reproduces the uninterrupted
// trajectory bitwise. Lives next to the checkpoint as <path>.state.
void save_train_state(const std::string& path, long iteration, const AdamState& state,
                      const std::mt19937& rng) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write training state: " + path);
    os.write("FRVT", 4);
    int64_t it = iteration, step = state.step;
    os.write(reinterpret_cast<const char*>(&it), 8);
    os.write(reinterpret_cast<const char*>(&step), 8);
    uint32_t n = static_cast<uint32_t>(state.moments.size());
    os.write(reinterpret_cast<const char*>(&n), 4);
    for (const auto& [name, mv] : state.moments) {
        uint32_t len = static_cast<uint32_t>(name.size());
        os.write(reinterpret_cast<const char*>(&len), 4);
        os.write(name.data(), len);
        uint64_t count = mv.first.numel();
        os.write(reinterpret_cast<const char*>(&count), 8);
        os.write(reinterpret_cast<const char*>(mv.first.data.data()), count * sizeof(float));
        os.write(reinterpret_cast<const char*>(mv.second.data.data()), count * sizeof(float));
    }
    std::ostringstream rs;
    rs << rng;
    const std::string r = rs.str();
    uint64_t rlen = r.size();
    os.write(reinterpret_cast<const char*>(&rlen), 8);
    os.write(r.data(), static_cast<std::streamsize>(rlen));
}

long load_train_state(const std::string& path, const ModelParams& params, AdamState& state,
                      std::mt19937& rng) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read training state: " + path);
    char magic[4];
    is.read(magic, 4);
    if (std::memcmp(magic, "FRVT", 4) != 0)
        throw std::runtime_error("bad training state file: " + path);
    int64_t it = 0, step = 0;
    is.read(reinterpret_cast<char*>(&it), 8);
    is.read(reinterpret_cast<char*>(&step), 8);
    state.step = step;
    uint32_t n = 0;
    is.read(reinterpret_cast<char*>(&n), 4);
    for (uint32_t i = 0; i < n; ++i) {
        uint32_t len = 0;
        is.read(reinterpret_cast<char*>(&len), 4);
        std::string name(len, '\0');
        is.read(name.data(), len);
        uint64_t count = 0;
        is.read(reinterpret_cast<char*>(&count), 8);
        const auto shape = params.store.at(name)->value.shape;
        auto& mv = state.moments.try_emplace(name, Tensor::zeros(shape), Tensor::zeros(shape))
                       .first->second;
        require(mv.first.numel() == count, "training state/checkpoint mismatch for " + name);
        is.read(reinterpret_cast<char*>(mv.first.data.data()), count * sizeof(float));
        is.read(reinterpret_cast<char*>(mv.second.data.data()), count * sizeof(float));
    }
    uint64_t rlen = 0;
    is.read(reinterpret_cast<char*>(&rlen), 8);
    std::string r(rlen, '\0');
    is.read(r.data(), static_cast<std::streamsize>(rlen));
    if (!is) throw std::runtime_error("truncated training state: " + path);
    std::istringstream rs(r);
    rs >> rng;
    return static_cast<long>(it);
}

TrainingSample draw_sample(const std::vector<LightField>& dataset, std::mt19937& rng,
                           const TrainOptions& opts) {
    std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
    const LightField& lf = dataset[pick(rng)];
    auto s = sample_pairs(lf, rng, 1).front();
    if (opts.crop_h > 0 && opts.crop_w > 0 &&
        (opts.crop_h < s.center.shape[1] || opts.crop_w < s.center.shape[2]))
        s = random_crop(s, std::min(opts.crop_h, s.center.shape[1]),
                        std::min(opts.crop_w, s.center.shape[2]), rng);
    return s;
}

}  // namespace

TrainResult train(ModelVariant variant, const std::vector<LightField>& dataset,
                  const TrainOptions& opts) {
    require(!dataset.empty(), "train: dataset is empty");
    opts.loss.validate();
    opts.optim.validate();

    TrainResult result;
    AdamState state;
    std::mt19937 rng(opts.optim.seed);
    long start_iter = 0;

    if (opts.resume) {
        require(!opts.checkpoint_path.empty(), "train: resume needs a checkpoint path");
        result.params = load_checkpoint(opts.checkpoint_path);
        require(result.params.variant == variant, "train: checkpoint variant mismatch");
        start_iter = load_train_state(opts.checkpoint_path + ".state", result.params, state, rng);
    } else {
        result.params = init_model<float>(variant, opts.optim.seed, opts.max_disp);
    }

    std::ofstream csv;
    if (!opts.log_csv_path.empty()) {
        csv.open(opts.log_csv_path, opts.resume ? std::ios::app : std::ios::trunc);
        if (!csv) throw std::runtime_error("train: cannot open log " + opts.log_csv_path);
        if (!opts.resume) csv << "iteration,l1,tv,total,wall_ms\n";
    }

    const float inv_batch = 1.0f / static_cast<float>(opts.optim.batch_size);
    for (long iter = start_iter; iter < opts.optim.iterations; ++iter) {
        const auto t0 = std::chrono::steady_clock::now();
        LossReport report;
        try {
            NodePtr batch_total;
            for (int b = 0; b < opts.optim.batch_size; ++b) {
                auto s = draw_sample(dataset, rng, opts);
                ModelInput input{std::move(s.center), std::move(s.depth), s.q};
                auto synth = synthesize_with_flow(result.params, input);
                auto [total, r] = loss(synth.image, s.target, synth.flow, opts.loss);
                report.l1 += r.l1 * inv_batch;
                report.tv += r.tv * inv_batch;
                batch_total = batch_total ? add(batch_total, total) : total;
            }
            batch_total = scale(batch_total, inv_batch);
            report.total = batch_total->value.data[0];
            if (!std::isfinite(report.total))
                throw std::runtime_error("non-finite batch loss");
            backward(batch_total);
        } catch (const std::exception& e) {
            throw std::runtime_error("train: aborted at iteration " + std::to_string(iter + 1) +
                                     " (l1=" + std::to_string(report.l1) +
                                     ", tv=" + std::to_string(report.tv) + "): " + e.what());
        }
        adam_step(result.params, state, opts.optim);
        result.params.store.zero_grad();
        result.log.push_back(report);

        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
        if (csv)
            csv << (iter + 1) << ',' << report.l1 << ',' << report.tv << ',' << report.total
                << ',' << ms << '\n';

        const bool last = iter + 1 == opts.optim.iterations;
        if (!opts.checkpoint_path.empty() &&
            (last || (opts.checkpoint_every > 0 && (iter + 1) % opts.checkpoint_every == 0))) {
            save_checkpoint(result.params, opts.checkpoint_path);
            save_train_state(opts.checkpoint_path + ".state", iter + 1, state, rng);
        }
    }
    return result;
}

}  // namespace frvs
