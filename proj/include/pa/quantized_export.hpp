#ifndef PA_QUANTIZED_EXPORT_HPP
#define PA_QUANTIZED_EXPORT_HPP

#include <string>

#include "pa/network.hpp"

namespace pa::net {

inline constexpr std::uint32_t kExportVersion = 1;

/// Writes a self-contained "PAQ1" inference file: u32 version, u32-length JSON metadata,
/// then records of three types.
///   0 binarized weights: name, geometry (4 x u32), M, u[M], alpha[M], sigma, lambda_W,
///     u32 words per plane, M planes of little-endian u64 words
///   1 real tensor:       name, shape (4 x u32), f32 payload
///   2 activation:        name, N, v[N], beta[N], lambda_A, lambda_delta
/// The network must be quantized and calibrated.
void export_quantized(Network& net, const std::string& path);

/// Rebuilds the network with frozen binarized weights (sum of alpha_i T_i).
Network import_quantized(const std::string& path);

/// True if the file starts with the export magic.
bool is_quantized_export(const std::string& path);

}  // namespace pa::net

#endif  // PA_QUANTIZED_EXPORT_HPP
