#pragma once

#include <qflow/flow.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

namespace qflow {

inline constexpr int kSummarySchemaVersion = 1;

FlowMode parse_mode(std::string_view text);
/// "exact" or "bch:k"; sets heff and bch_order. Throws std::invalid_argument.
void parse_heff(std::string_view text, FlowConfig& config);
std::string heff_label(const FlowConfig& config);

/// Flat `key=value` lines, one per field, sorted by key. `#` starts a comment.
std::string serialize_config(const FlowConfig& config);
/// Overlays the keys found in `text` on `base`. Unknown keys and malformed
/// values throw std::invalid_argument.
FlowConfig parse_config(std::string_view text, FlowConfig base = {});

/// 64-bit FNV-1a of the bytes, as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);
/// Hash of the serialized config combined with the input bytes.
std::string config_hash(const FlowConfig& config, std::string_view input_bytes);

/// `# config_hash=...` then `cycle,space_id,occ,virt,e_before,e_after,delta_e,grad_norm,params`;
/// occ and virt are `;`-separated spatial orbital lists.
void write_trace_csv(std::ostream& out, const FlowTrace& trace, const std::vector<FlowSpace>& spaces,
                     const std::string& hash);
std::string trace_json(const FlowTrace& trace, const std::string& hash);
std::string summary_json(const FlowResult& result, const FlowConfig& config, const std::string& hash,
                         std::optional<double> ed_energy);

}  // namespace qflow
