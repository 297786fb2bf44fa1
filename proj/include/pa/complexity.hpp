#ifndef PA_COMPLEXITY_HPP
#define PA_COMPLEXITY_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pa::complexity {

enum class LayerKind { Conv, FullyConnected };

/// One weighted layer of a network, with the geometry needed for cost accounting.
struct LayerDesc {
  std::string name;
  LayerKind kind = LayerKind::Conv;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t in_h = 1, in_w = 1;
  std::size_t out_h = 1, out_w = 1;
  bool first = false;
  bool last = false;
  bool downsample = false;
  bool bias = false;
  /// Channels of the batch-norm that follows (or precedes, for pre-activation blocks); 0 if none.
  std::size_t bn_channels = 0;

  std::size_t weight_count() const { return in_channels * out_channels * kernel * kernel; }
  std::size_t fan_in() const { return in_channels * kernel * kernel; }
  std::size_t output_count() const { return out_channels * out_h * out_w; }
  std::size_t input_count() const { return in_channels * in_h * in_w; }
  std::size_t macs() const { return weight_count() * out_h * out_w; }
};

struct Architecture {
  std::string id;
  std::vector<LayerDesc> layers;
};

/// resnet18 / resnet34 / resnet50 (224x224 ImageNet, stride on the first 1x1 of a
/// bottleneck), resnet20 (32x32 CIFAR, pre-activation) and lenet (28x28 MNIST).
Architecture architecture(std::string_view id);
std::vector<std::string> known_architectures();

enum class Scheme { FullPrecision, SingleBinary, MultiBinaryPA, MultiBinaryABC };

std::string to_string(Scheme scheme);
Scheme parse_scheme(std::string_view name);

struct SchemeSpec {
  Scheme scheme = Scheme::FullPrecision;
  std::size_t weight_bases = 4;      // M
  std::size_t activation_bases = 5;  // N
  bool first_last_real = true;
  /// Unset: binarized for PA, kept real for the single-binary and ABC baselines.
  std::optional<bool> downsample_binarized;

  bool binarizes_downsample() const;
  bool binarizes(const LayerDesc& layer) const;
  void validate() const;
};

struct LayerCost {
  std::string name;
  bool binarized = false;
  double memory_bits = 0.0;
  double real_multiplications = 0.0;
  double comparisons = 0.0;
  double bitwise_operations = 0.0;
  /// Real multiplications plus 1/64 of the bitwise operations.
  double flops = 0.0;
};

struct ComplexityReport {
  std::string architecture;
  SchemeSpec spec;
  std::vector<LayerCost> layers;
  double memory_bits = 0.0;
  double flops = 0.0;
  double comparisons = 0.0;
  double full_precision_memory_bits = 0.0;
  double full_precision_flops = 0.0;
  double memory_saving = 1.0;
  double speedup = 1.0;
};

/// Per-layer and total memory: 32 bits per real value, 1 bit per binary value.
ComplexityReport memory_bits(const Architecture& arch, const SchemeSpec& spec);
/// Per-layer and total Flops with the 1/64 bitwise credit.
ComplexityReport flops(const Architecture& arch, const SchemeSpec& spec);
/// Both, plus ratios against the full-precision twin.
ComplexityReport analyze(const Architecture& arch, const SchemeSpec& spec);

/// Delays in ps, area in nm^2, power in nW. Gate values are the 7-nm 2-input figures.
struct GateTimings {
  double xnor_delay = 10.87;
  double and_delay = 9.62;
  double xnor_area = 2.90e3;
  double and_area = 1.45e3;
  double xnor_power = 1.23e3;
  double and_power = 6.24e2;
  double mul_delay = 250.0;
  double add_delay = 120.0;
  double com_delay = 60.0;
  /// One level of the popcount adder tree: a full-adder sum path, two XOR-class gates.
  double adder_stage_delay = 2.0 * 10.87;
  /// Unset: ceil(log2(fan-in)) adder-tree levels times adder_stage_delay.
  std::optional<double> pop_delay;

  void validate() const;
  double popcount_delay(std::size_t fan_in) const;
};

/// Reads overrides from a JSON object with any of the GateTimings field names.
GateTimings load_gate_timings(const std::string& path);

struct LatencyEstimate {
  std::size_t fan_in = 0;  // c_in * h * w of one filter
  double full_precision = 0.0;
  double single_binary = 0.0;
  /// PA latency with the constant term exactly as published for M=4, N=5.
  double pa_printed = 0.0;
  /// PA latency with a worst-case M*N multiplies, M*N-1 adds and one compare.
  double pa_general = 0.0;
  double speedup_single_binary = 0.0;    // full / single_binary
  double speedup_pa = 0.0;               // full / pa_printed
  double speedup_pa_asymptotic = 0.0;    // (T_mul + T_add) / (T_AND + T_pop)
  double speedup_xnor_asymptotic = 0.0;  // (T_mul + T_add) / (T_XNOR + T_pop)
};

LatencyEstimate latency_estimate(const LayerDesc& layer, const SchemeSpec& spec,
                                 const GateTimings& gates);

enum class ReportFormat { Json, Csv, Text };
ReportFormat parse_format(std::string_view name);

std::string emit_report(const ComplexityReport& report, ReportFormat format);
std::string emit_comparison(const std::vector<ComplexityReport>& reports, ReportFormat format);
/// Inverse of the JSON emission; used for round-trip checks and tooling.
ComplexityReport parse_json_report(const std::string& text);

inline constexpr const char* kCsvHeader =
    "architecture,scheme,layer,binarized,memory_bits,flops,real_multiplications,comparisons,"
    "bitwise_operations";

}  // namespace pa::complexity

#endif  // PA_COMPLEXITY_HPP
