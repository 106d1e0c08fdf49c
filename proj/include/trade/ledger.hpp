#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "trade/bytes.hpp"
#include "trade/crypto.hpp"
#include "trade/errors.hpp"

namespace trade {

enum class NetworkTag : std::uint8_t { Identity = 0, Activity = 1 };

inline const char* network_name(NetworkTag tag) {
  return tag == NetworkTag::Identity ? "identity" : "activity";
}

// Transaction vocabulary across both networks. Wire names below are the
// strings used in ledger dumps and scenario reports.
enum class TxType : std::uint8_t {
  // identity network
  OriginalIdentity = 0,     // organization profile stored by a registrar
  BlockchainIdentity = 1,   // pseudo-identity minted by a registrar
  PolicyCreation = 2,       // policy create/modify/delete
  ProfileBadge = 3,         // badge issued after policy validation
  OrganizationRevocation = 4,
  ViolationAddition = 5,
  IdentityExposure = 6,     // consensus exposure event, never carries a name
  // activity network
  CyberThreatAssociation = 7,  // data record + policy association
  AccessToken = 8,             // access permission request -> stored APT
  AccessData = 9,              // server-side retrieval log entry
  KarmaTransfer = 10,
  RatingSubmission = 11,
  LegalSignature = 12,
};

inline const char* tx_type_wire_name(TxType t) {
  switch (t) {
    case TxType::OriginalIdentity: return "TX_ORIGINAL";
    case TxType::BlockchainIdentity: return "TX_BLOCKCHAIN";
    case TxType::PolicyCreation: return "TX_POLICY";
    case TxType::ProfileBadge: return "ITX_BADGE";
    case TxType::OrganizationRevocation: return "ITX_REVOKE";
    case TxType::ViolationAddition: return "ITX_VIOLATION";
    case TxType::IdentityExposure: return "ITX_EXPOSURE";
    case TxType::CyberThreatAssociation: return "ATX_CYBER_THREAT";
    case TxType::AccessToken: return "ATX_ACCESS_TOKEN";
    case TxType::AccessData: return "ATX_ACCESS_DATA";
    case TxType::KarmaTransfer: return "ATX_KARMA";
    case TxType::RatingSubmission: return "ATX_RATING";
    case TxType::LegalSignature: return "ATX_LEGAL_SIGNATURE";
  }
  return "TX_UNKNOWN";
}

inline std::optional<TxType> tx_type_from_wire_name(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(TxType::LegalSignature); ++i) {
    auto t = static_cast<TxType>(i);
    if (name == tx_type_wire_name(t)) return t;
  }
  return std::nullopt;
}

enum class MemberRole : std::uint8_t { Registrar = 0, Client = 1, Server = 2 };

inline const char* member_role_name(MemberRole r) {
  switch (r) {
    case MemberRole::Registrar: return "registrar";
    case MemberRole::Client: return "client";
    case MemberRole::Server: return "server";
  }
  return "unknown";
}

struct Transaction {
  Digest tx_id;
  TxType type = TxType::OriginalIdentity;
  std::string submitter;  // pseudonym address or registrar/server id
  Bytes payload;          // canonical encoding of the contract call
  Signature signature;    // over (type, submitter, payload)
  Tick timestamp = 0;

  static Bytes signing_bytes(TxType type, const std::string& submitter, const Bytes& payload) {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(type));
    w.str(submitter);
    w.bytes(payload);
    return w.take();
  }

  static Digest compute_id(TxType type, const std::string& submitter, const Bytes& payload,
                           Tick timestamp) {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(type));
    w.str(submitter);
    w.bytes(payload);
    w.u64(timestamp);
    return sha256(w.data());
  }

  static Transaction make(TxType type, const std::string& submitter, Bytes payload,
                          const KeyPair& signer, Tick timestamp) {
    Transaction tx;
    tx.type = type;
    tx.submitter = submitter;
    tx.payload = std::move(payload);
    tx.signature = signer.sign(signing_bytes(type, submitter, tx.payload));
    tx.timestamp = timestamp;
    tx.tx_id = compute_id(type, submitter, tx.payload, timestamp);
    return tx;
  }

  void encode(ByteWriter& w) const {
    w.u8(static_cast<std::uint8_t>(type));
    w.str(submitter);
    w.bytes(payload);
    w.raw(signature.bytes.data(), signature.bytes.size());
    w.u64(timestamp);
    w.raw(tx_id.bytes.data(), tx_id.bytes.size());
  }
};

struct Block {
  std::uint64_t height = 0;
  std::vector<Transaction> confirmed;
  Digest prev_digest;

  Digest digest() const {
    ByteWriter w;
    w.u64(height);
    w.raw(prev_digest.bytes.data(), prev_digest.bytes.size());
    w.u32(static_cast<std::uint32_t>(confirmed.size()));
    for (const auto& tx : confirmed) tx.encode(w);
    return sha256(w.data());
  }
};

// One line of the text dump format:
//   height|tx_id(hex)|tx_type|submitter|payload(hex)
struct DumpEntry {
  std::uint64_t height = 0;
  Digest tx_id;
  TxType type = TxType::OriginalIdentity;
  std::string submitter;
  Bytes payload;
};

inline Result<DumpEntry> parse_dump_line(std::string_view line) {
  auto fail = [&](const std::string& why) {
    return Result<DumpEntry>::failure(Errc::MalformedDump, why);
  };
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == '|') {
      fields.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  if (fields.size() != 5) return fail("expected 5 |-separated fields");
  DumpEntry e;
  try {
    e.height = std::stoull(std::string(fields[0]));
  } catch (...) {
    return fail("bad height");
  }
  Bytes id_bytes;
  if (!hex_decode(fields[1], id_bytes) || id_bytes.size() != 32) return fail("bad tx id");
  e.tx_id = Digest::from_bytes(id_bytes);
  auto type = tx_type_from_wire_name(fields[2]);
  if (!type) return fail("bad tx type: " + std::string(fields[2]));
  e.type = *type;
  e.submitter = std::string(fields[3]);
  if (!hex_decode(fields[4], e.payload)) return fail("bad payload hex");
  return e;
}

// Append-only permissioned ledger with a pending pool and an explicit
// confirmation step. Plain value type; serialization of writers is the
// caller's job (the networks wrap one of these behind a mutex, the workflow
// explorer copies whole values between states).
class Ledger {
 public:
  struct Member {
    PublicKey public_key;
    MemberRole role = MemberRole::Client;
  };

  explicit Ledger(NetworkTag tag = NetworkTag::Identity) : tag_(tag) {}

  NetworkTag network() const { return tag_; }

  // Table of entity/type pairs permitted on each network. Pairs absent here
  // are rejected at submission, so a confirmed chain can never violate the
  // partition.
  static bool type_allowed(NetworkTag tag, MemberRole role, TxType type) {
    if (tag == NetworkTag::Identity) {
      switch (role) {
        case MemberRole::Registrar:
          return type == TxType::OriginalIdentity || type == TxType::BlockchainIdentity ||
                 type == TxType::OrganizationRevocation || type == TxType::ViolationAddition ||
                 type == TxType::IdentityExposure;
        case MemberRole::Client:
          return type == TxType::PolicyCreation || type == TxType::ProfileBadge;
        case MemberRole::Server:
          return false;
      }
      return false;
    }
    switch (role) {
      case MemberRole::Registrar:
        return false;
      case MemberRole::Client:
        return type == TxType::CyberThreatAssociation || type == TxType::AccessToken ||
               type == TxType::KarmaTransfer || type == TxType::RatingSubmission ||
               type == TxType::LegalSignature;
      case MemberRole::Server:
        return type == TxType::AccessData;
    }
    return false;
  }

  std::set<TxType> allowed_types() const {
    std::set<TxType> out;
    for (int i = 0; i <= static_cast<int>(TxType::LegalSignature); ++i) {
      auto t = static_cast<TxType>(i);
      for (auto role : {MemberRole::Registrar, MemberRole::Client, MemberRole::Server})
        if (type_allowed(tag_, role, t)) out.insert(t);
    }
    return out;
  }

  void add_member(const std::string& id, const PublicKey& key, MemberRole role) {
    members_[id] = Member{key, role};
  }

  bool is_member(const std::string& id) const { return members_.count(id) != 0; }

  const Member* member(const std::string& id) const {
    auto it = members_.find(id);
    return it == members_.end() ? nullptr : &it->second;
  }

  Result<Digest> submit(const Transaction& tx) {
    auto it = members_.find(tx.submitter);
    if (it == members_.end())
      return Result<Digest>::failure(Errc::UnknownSubmitter, tx.submitter);
    if (!type_allowed(tag_, it->second.role, tx.type))
      return Result<Digest>::failure(
          Errc::ForbiddenTransactionType,
          std::string(tx_type_wire_name(tx.type)) + " by " + member_role_name(it->second.role) +
              " on " + network_name(tag_) + " network");
    Bytes msg = Transaction::signing_bytes(tx.type, tx.submitter, tx.payload);
    if (!verify_signature(it->second.public_key, msg, tx.signature))
      return Result<Digest>::failure(Errc::BadSignature, tx.tx_id.hex());
    if (tx.tx_id != Transaction::compute_id(tx.type, tx.submitter, tx.payload, tx.timestamp))
      return Result<Digest>::failure(Errc::BadSignature, "tx id does not match contents");
    if (known_ids_.count(tx.tx_id))
      return Result<Digest>::failure(Errc::DuplicateTxId, tx.tx_id.hex());
    pool_.push_back(tx);
    known_ids_.insert(tx.tx_id);
    return tx.tx_id;
  }

  // Drains the whole pool into one new block, ordered by (timestamp, tx_id).
  // Returns the number of confirmed transactions; 0 leaves the chain alone.
  std::size_t confirm_receipt() {
    if (pool_.empty()) return 0;
    std::sort(pool_.begin(), pool_.end(), [](const Transaction& a, const Transaction& b) {
      if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
      return a.tx_id < b.tx_id;
    });
    Block block;
    block.height = chain_.size();
    block.prev_digest = chain_.empty() ? Digest{} : chain_.back().digest();
    block.confirmed = std::move(pool_);
    pool_.clear();
    std::size_t count = block.confirmed.size();
    chain_.push_back(std::move(block));
    return count;
  }

  Result<std::vector<Transaction>> query(
      const std::string& caller, const std::function<bool(const Transaction&)>& filter) const {
    if (!is_member(caller))
      return Result<std::vector<Transaction>>::failure(Errc::UnknownSubmitter, caller);
    std::vector<Transaction> out;
    for (const auto& block : chain_)
      for (const auto& tx : block.confirmed)
        if (filter(tx)) out.push_back(tx);
    return out;
  }

  std::size_t count_confirmed(TxType type) const {
    std::size_t n = 0;
    for (const auto& block : chain_)
      for (const auto& tx : block.confirmed)
        if (tx.type == type) ++n;
    return n;
  }

  const std::vector<Block>& chain() const { return chain_; }
  const std::vector<Transaction>& pool() const { return pool_; }

  bool pool_contains(const Digest& id) const {
    for (const auto& tx : pool_)
      if (tx.tx_id == id) return true;
    return false;
  }

  bool chain_contains(const Digest& id) const {
    return known_ids_.count(id) != 0 && !pool_contains(id);
  }

  Digest chain_digest() const { return chain_.empty() ? Digest{} : chain_.back().digest(); }

  void dump(std::ostream& os) const {
    for (const auto& block : chain_)
      for (const auto& tx : block.confirmed)
        os << block.height << '|' << tx.tx_id.hex() << '|' << tx_type_wire_name(tx.type) << '|'
           << tx.submitter << '|' << hex_encode(tx.payload) << '\n';
  }

  // Canonical encoding of the whole ledger value; the workflow explorer
  // hashes this for its visited set.
  void encode(ByteWriter& w) const {
    w.u8(static_cast<std::uint8_t>(tag_));
    w.u32(static_cast<std::uint32_t>(chain_.size()));
    for (const auto& block : chain_) {
      auto d = block.digest();
      w.raw(d.bytes.data(), d.bytes.size());
    }
    // Pool is a set: order of arrival must not distinguish states.
    std::vector<Digest> pending;
    for (const auto& tx : pool_) pending.push_back(tx.tx_id);
    std::sort(pending.begin(), pending.end());
    w.u32(static_cast<std::uint32_t>(pending.size()));
    for (const auto& d : pending) w.raw(d.bytes.data(), d.bytes.size());
  }

 private:
  NetworkTag tag_;
  std::vector<Transaction> pool_;
  std::vector<Block> chain_;
  std::set<Digest> known_ids_;
  std::map<std::string, Member> members_;
};

}  // namespace trade
