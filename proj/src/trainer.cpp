#include "pa/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>
#include <stdexcept>

namespace pa::net {

void TrainConfig::validate() const {
  if (!(lr > 0.0f)) throw std::invalid_argument("learning rate must be positive");
  if (!(decay > 0.0f && decay <= 1.0f)) throw std::invalid_argument("decay factor must lie in (0, 1]");
  if (batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
  optimizer.validate();
}

nlohmann::json EpochMetrics::to_json() const {
  return {{"epoch", epoch},         {"loss", loss}, {"train_top1", train_top1}, {"test_top1", test_top1},
          {"test_top5", test_top5}, {"lr", lr},     {"seconds", seconds}};
}

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

EvalResult evaluate(Network& net, const data::Dataset& ds, std::size_t batch_size, bool verify) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
  EvalResult r;
  if (verify) net.set_verify(&r.verify);
  double loss = 0.0;
  std::size_t top1 = 0, top5 = 0;
  std::vector<std::size_t> idx;
  try {
    for (std::size_t start = 0; start < ds.size(); start += batch_size) {
      idx.resize(std::min(batch_size, ds.size() - start));
      std::iota(idx.begin(), idx.end(), start);
      const auto labels = ds.batch_labels(idx);
      const LossResult l = softmax_cross_entropy(net.forward(ds.batch(idx), false), labels);
      loss += l.loss * static_cast<double>(idx.size());
      top1 += l.top1;
      top5 += l.top5;
    }
  } catch (...) {
    net.set_verify(nullptr);
    throw;
  }
  net.set_verify(nullptr);
  r.samples = ds.size();
  if (r.samples) {
    const double n = static_cast<double>(r.samples);
    r.loss = loss / n;
    r.top1 = static_cast<double>(top1) / n;
    r.top5 = static_cast<double>(top5) / n;
  }
  return r;
}

Trainer::Trainer(Network& net, TrainConfig config)
    : net_(net), config_(config), optimizer_(config.optimizer), lr_(config.lr) {
  config_.validate();
}

LossResult Trainer::step(const Tensor& x, std::span<const std::uint8_t> labels) {
  net_.zero_grad();
  LossResult l = softmax_cross_entropy(net_.forward(x, true), labels);
  net_.backward(l.grad);
  optimizer_.step(net_.parameters(), lr_);
  net_.after_update();
  return l;
}

EpochMetrics Trainer::run_epoch(const data::Dataset& train, const data::Dataset* test) {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(epoch_seed(config_.seed, epoch_));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  EpochMetrics m;
  m.epoch = epoch_ + 1;
  m.lr = lr_;
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < order.size(); begin += config_.batch_size) {
    const std::span<const std::size_t> idx(order.data() + begin, std::min(config_.batch_size, order.size() - begin));
    Tensor x = train.batch(idx);
    if (config_.augment) data::augment_flip_crop(x, 4, rng);
    const LossResult l = step(x, train.batch_labels(idx));
    loss += l.loss * static_cast<double>(idx.size());
    correct += l.top1;
  }
  if (!order.empty()) {
    m.loss = loss / static_cast<double>(order.size());
    m.train_top1 = static_cast<double>(correct) / static_cast<double>(order.size());
  }
  if (test) {
    const EvalResult e = evaluate(net_, *test, 256);
    m.test_top1 = e.top1;
    m.test_top5 = e.top5;
  }
  ++epoch_;
  lr_ *= config_.decay;
  m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return m;
}

std::vector<EpochMetrics> Trainer::fit(const data::Dataset& train, const data::Dataset* test,
                                       const std::function<void(const EpochMetrics&)>& on_epoch) {
  std::vector<EpochMetrics> out;
  while (epoch_ < config_.epochs) {
    out.push_back(run_epoch(train, test));
    if (on_epoch) on_epoch(out.back());
  }
  return out;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ck = capture(net_);
  optimizer_.save(ck);
  ck.meta["train"] = {{"epoch", epoch_},           {"lr", lr_},        {"base_lr", config_.lr},
                      {"decay", config_.decay},    {"seed", config_.seed}, {"batch_size", config_.batch_size}};
  return ck;
}

void Trainer::resume(const Checkpoint& checkpoint) {
  restore(net_, checkpoint);
  if (!checkpoint.meta.contains("train")) throw std::runtime_error("checkpoint has no training state to resume");
  const auto& t = checkpoint.meta.at("train");
  epoch_ = t.at("epoch").get<std::size_t>();
  lr_ = t.at("lr").get<float>();
  optimizer_.load(checkpoint);
}

}  // namespace pa::net
