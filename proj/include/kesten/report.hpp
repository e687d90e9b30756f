#pragma once

#include "kesten/geometry.hpp"
#include "kesten/model.hpp"
#include "kesten/operator.hpp"
#include "kesten/regeneration.hpp"
#include "kesten/shifted_chain.hpp"
#include "kesten/tail.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace kesten {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";

/// Provenance carried by every emitted file.
struct Stamp {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::map<std::string, std::string> inputs;  ///< file name -> content digest
};

Json to_json(const Stamp& s);
/// One comment line for the top of a CSV file.
std::string csv_stamp(const Stamp& s);

Json to_json(const RowVec& v);
Json to_json(const AssumptionReport& r);
Json to_json(const LyapunovEstimate& e);
/// kappa summary; the eigenfunction itself goes to r.csv.
Json to_json(const KappaSolution& k, const OperatorConfig& cfg);
Json to_json(const StationaryEstimate& e);
Json to_json(const DriftIntegral& d);
Json to_json(const GoldieResult& g);
Json to_json(const TailReport& r);
Json to_json(const SupTailResult& s);
Json to_json(const MinorizationSpec& m);
Json to_json(const RegenDiagnostics& d);
Json to_json(const IncrementBounds& b);

/// Stable text form: two-space indent and a trailing newline.
std::string dump(const Json& j);

}  // namespace kesten
