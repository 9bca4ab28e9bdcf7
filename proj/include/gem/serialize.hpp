#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "gem/engine.hpp"
#include <nlohmann/json.hpp>

namespace gem {

using Json = nlohmann::json;

Json salience_params_to_json(const SalienceParams& p);
SalienceParams salience_params_from_json(const Json& j);

// A bare number is a constant bound; an object carries constant and slope.
Json beta_to_json(const BetaSpec& b);
BetaSpec beta_from_json(const Json& j);

// Self-contained: policies and rules are inlined as text.
Json config_to_json(const EngineConfig& c);
EngineConfig config_from_json(const Json& j);

Json to_json(const MemoryState& s);
MemoryState state_from_json(const Json& j);

Json to_json(const FactBundle& b);
FactBundle bundle_from_json(const Json& j);
Json to_json(const Query& q);
Query query_from_json(const Json& j);
Json to_json(const RetrievalOutput& o);
RetrievalOutput output_from_json(const Json& j);
Json to_json(const EvidenceItem& e);
EvidenceItem evidence_from_json(const Json& j);
Json to_json(const Delta& d);
Delta delta_from_json(const Json& j);
Json to_json(const EngineEvent& e);
EngineEvent event_from_json(const Json& j);
Json to_json(const TransitionRecord& r);
TransitionRecord record_from_json(const Json& j);

// Binary journal: "GEMJ", u32 version, u32-length header JSON, then one
// u32-length record JSON per transition. Integers are little-endian.
std::string encode_journal(const Journal& j);
Journal decode_journal(std::string_view bytes);
void write_journal(const std::filesystem::path& path, const Journal& j);
Journal read_journal(const std::filesystem::path& path);

// Snapshot: "GEMS", u32 version, u32-length state JSON, 32-byte digest.
inline constexpr std::uint32_t kSnapshotVersion = 1;
std::string encode_snapshot(const MemoryState& s);
MemoryState decode_snapshot(std::string_view bytes);
void write_snapshot(const std::filesystem::path& path, const MemoryState& s);
MemoryState read_snapshot(const std::filesystem::path& path);

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::string_view bytes);

}  // namespace gem
