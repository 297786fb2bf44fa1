#include "pa/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace pa::net {

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "sgd" || name == "sgd-momentum") return OptimizerKind::SgdMomentum;
  if (name == "adam") return OptimizerKind::Adam;
  throw std::invalid_argument("unknown optimizer '" + name + "'; known: sgd-momentum, adam");
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::Adam ? "adam" : "sgd-momentum"; }

void OptimizerConfig::validate() const {
  if (momentum < 0.0f || momentum >= 1.0f) throw std::invalid_argument("momentum must lie in [0, 1)");
  if (beta1 < 0.0f || beta1 >= 1.0f || beta2 < 0.0f || beta2 >= 1.0f) {
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0f)) throw std::invalid_argument("Adam epsilon must be positive");
  if (weight_decay < 0.0f) throw std::invalid_argument("weight decay must be non-negative");
}

Optimizer::Optimizer(OptimizerConfig config) : config_(config) { config_.validate(); }

Tensor& Optimizer::slot(std::map<std::string, Tensor>& slots, const TensorRef& p) {
  auto it = slots.find(p.name);
  if (it == slots.end()) it = slots.emplace(p.name, Tensor(p.value->shape())).first;
  if (it->second.shape() != p.value->shape()) throw std::logic_error("optimizer state shape changed for " + p.name);
  return it->second;
}

void Optimizer::step(const std::vector<TensorRef>& params, float lr) {
  if (!(lr > 0.0f)) throw std::invalid_argument("learning rate must be positive");
  ++steps_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(config_.beta1), static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(static_cast<double>(config_.beta2), static_cast<double>(steps_));
  for (const auto& p : params) {
    if (!p.grad) continue;
    Tensor& w = *p.value;
    const Tensor& g = *p.grad;
    const float decay = p.role == TensorRole::Weight ? config_.weight_decay : 0.0f;
    Tensor& m = slot(first_, p);
    if (config_.kind == OptimizerKind::SgdMomentum) {
      for (std::size_t i = 0; i < w.size(); ++i) {
        const float gi = g[i] + decay * w[i];
        m[i] = config_.momentum * m[i] + gi;
        w[i] -= lr * m[i];
      }
    } else {
      Tensor& v = slot(second_, p);
      for (std::size_t i = 0; i < w.size(); ++i) {
        const float gi = g[i] + decay * w[i];
        m[i] = config_.beta1 * m[i] + (1.0f - config_.beta1) * gi;
        v[i] = config_.beta2 * v[i] + (1.0f - config_.beta2) * gi * gi;
        const double mhat = m[i] / bc1, vhat = v[i] / bc2;
        w[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + config_.epsilon));
      }
    }
  }
}

void Optimizer::save(Checkpoint& checkpoint) const {
  checkpoint.meta["optimizer"] = {{"kind", to_string(config_.kind)},
                                  {"momentum", config_.momentum},
                                  {"beta1", config_.beta1},
                                  {"beta2", config_.beta2},
                                  {"epsilon", config_.epsilon},
                                  {"weight_decay", config_.weight_decay},
                                  {"steps", steps_}};
  for (const auto& [name, t] : first_) checkpoint.put("optimizer.m." + name, EntryKind::Optimizer, t);
  for (const auto& [name, t] : second_) checkpoint.put("optimizer.v." + name, EntryKind::Optimizer, t);
}

void Optimizer::load(const Checkpoint& checkpoint) {
  if (!checkpoint.meta.contains("optimizer")) throw std::runtime_error("checkpoint has no optimizer state");
  const auto& j = checkpoint.meta.at("optimizer");
  if (parse_optimizer(j.at("kind").get<std::string>()) != config_.kind) {
    throw std::runtime_error("checkpoint optimizer '" + j.at("kind").get<std::string>() + "' differs from '" +
                             to_string(config_.kind) + "'");
  }
  steps_ = j.at("steps").get<std::uint64_t>();
  first_.clear();
  second_.clear();
  for (const auto& e : checkpoint.entries) {
    if (e.kind != EntryKind::Optimizer) continue;
    if (e.name.starts_with("optimizer.m.")) first_[e.name.substr(12)] = e.value;
    if (e.name.starts_with("optimizer.v.")) second_[e.name.substr(12)] = e.value;
  }
}

}  // namespace pa::net
