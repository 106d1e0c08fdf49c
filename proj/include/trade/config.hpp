#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>

#include "trade/bytes.hpp"
#include "trade/errors.hpp"

namespace trade {

// Logical time. Ticks only move when the simulation driver says so, which
// keeps every timestamp, expiry and tie-break replayable.
struct SimClock {
  Tick now = 0;
  void advance(Tick n = 1) { now += n; }
};

// Tunables for one simulation. Scenario scripts may override any of these
// through `config <key> <value>` lines; the CLI accepts the same keys from
// a config file of `key = value` lines.
struct SimConfig {
  // karma economy
  std::int64_t karma_publish_reward = 10;
  std::int64_t karma_consume_cost = 5;
  std::int64_t karma_rating_discount = 1;
  std::int64_t karma_initial_grant = 10;
  // reputation (exact rational, numerator/denominator)
  std::int64_t reputation_default_num = 5;
  std::int64_t reputation_default_den = 2;
  // access tokens
  Tick apt_ttl = 100;
  // server-side retrieval checks
  Tick stale_window = 5;
  std::size_t max_payload_bytes = 1 << 20;
  std::size_t min_payload_bytes = 1;
  // deterministic key derivation
  std::uint64_t seed = 1;
  // test-only: embed real organization names in registration payloads so the
  // anonymity audit has a known-bad configuration to catch
  bool leak_real_names = false;

  Status set(const std::string& key, const std::string& raw) {
    auto as_int = [&]() -> Result<std::int64_t> {
      try {
        std::size_t used = 0;
        std::int64_t v = std::stoll(raw, &used);
        if (used != raw.size())
          return Result<std::int64_t>::failure(Errc::ScriptParseError, "bad integer: " + raw);
        return v;
      } catch (...) {
        return Result<std::int64_t>::failure(Errc::ScriptParseError, "bad integer: " + raw);
      }
    };
    auto set_int = [&](std::int64_t& field, bool allow_negative = false) -> Status {
      auto v = as_int();
      if (!v.ok()) return Status(v.error());
      if (!allow_negative && v.value() < 0)
        return Status::failure(Errc::ScriptParseError, key + " must be >= 0");
      field = v.value();
      return ok_status();
    };
    if (key == "karma.publish_reward") return set_int(karma_publish_reward);
    if (key == "karma.consume_cost") return set_int(karma_consume_cost);
    if (key == "karma.rating_discount") return set_int(karma_rating_discount);
    if (key == "karma.initial_grant") return set_int(karma_initial_grant);
    if (key == "reputation.default") {
      // accept "2.5" style decimals as an exact rational
      auto dot = raw.find('.');
      try {
        if (dot == std::string::npos) {
          reputation_default_num = std::stoll(raw);
          reputation_default_den = 1;
        } else {
          std::string whole = raw.substr(0, dot);
          std::string frac = raw.substr(dot + 1);
          if (frac.empty()) return Status::failure(Errc::ScriptParseError, "bad decimal: " + raw);
          std::int64_t den = 1;
          for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
          reputation_default_num = std::stoll(whole) * den + std::stoll(frac);
          reputation_default_den = den;
        }
      } catch (...) {
        return Status::failure(Errc::ScriptParseError, "bad decimal: " + raw);
      }
      if (reputation_default_num < 0 || reputation_default_num * 1 > 5 * reputation_default_den)
        return Status::failure(Errc::ScriptParseError, "reputation.default must be in [0,5]");
      return ok_status();
    }
    if (key == "apt.ttl") {
      auto v = as_int();
      if (!v.ok() || v.value() <= 0)
        return Status::failure(Errc::ScriptParseError, "apt.ttl must be > 0");
      apt_ttl = static_cast<Tick>(v.value());
      return ok_status();
    }
    if (key == "server.stale_window") {
      auto v = as_int();
      if (!v.ok() || v.value() < 0)
        return Status::failure(Errc::ScriptParseError, "server.stale_window must be >= 0");
      stale_window = static_cast<Tick>(v.value());
      return ok_status();
    }
    if (key == "server.max_payload_bytes") {
      auto v = as_int();
      if (!v.ok() || v.value() < 1)
        return Status::failure(Errc::ScriptParseError, "server.max_payload_bytes must be >= 1");
      max_payload_bytes = static_cast<std::size_t>(v.value());
      return ok_status();
    }
    if (key == "seed") {
      auto v = as_int();
      if (!v.ok()) return Status(v.error());
      seed = static_cast<std::uint64_t>(v.value());
      return ok_status();
    }
    if (key == "test.leak_real_names") {
      leak_real_names = (raw == "true" || raw == "1");
      return ok_status();
    }
    return Status::failure(Errc::ScriptParseError, "unknown config key: " + key);
  }
};

// `key = value` lines; '#' starts a comment; blank lines ignored.
inline Status load_config_file(SimConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) return Status::failure(Errc::ScriptParseError, "cannot open config file: " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      std::size_t b = 0, e = s.size();
      while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
      while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
      return s.substr(b, e - b);
    };
    std::string stripped = trim(line);
    if (stripped.empty()) continue;
    auto eq = stripped.find('=');
    if (eq == std::string::npos)
      return Status::failure(Errc::ScriptParseError, "expected key = value", lineno);
    auto st = config.set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
    if (!st.ok()) return Status::failure(st.error().code, st.error().detail, lineno);
  }
  return ok_status();
}

}  // namespace trade
