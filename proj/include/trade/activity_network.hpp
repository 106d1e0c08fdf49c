#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "trade/config.hpp"
#include "trade/identity_network.hpp"
#include "trade/incentives.hpp"
#include "trade/ledger.hpp"

namespace trade {

enum class Privilege : std::uint8_t { Read = 0, Subscribe = 1 };

inline const char* privilege_name(Privilege p) {
  return p == Privilege::Read ? "read" : "subscribe";
}

inline std::optional<Privilege> privilege_from_name(std::string_view name) {
  if (name == "read") return Privilege::Read;
  if (name == "subscribe") return Privilege::Subscribe;
  return std::nullopt;
}

struct DataRecord {
  std::string record_uid;
  std::string owner;  // temporary pseudonym address
  std::map<Privilege, std::vector<std::string>> privilege_policy_map;
  Digest content_digest;
  std::string description;
  std::set<std::string> keywords;  // lowercase
  std::string server_address;
  Tick published_at = 0;
  std::optional<std::string> legal_contract_id;
};

struct AccessPermissionToken {
  std::string apt_ref;
  std::string requester;
  PublicKey requester_public_key;
  Privilege privilege = Privilege::Read;
  std::string record_uid;
  Tick expiration = 0;
  Tick issued_at = 0;
  std::vector<std::string> badge_refs;
};

enum class NotifyReason : std::uint8_t { NewRecord = 0, Modified = 1, NewTrustGroup = 2 };

inline const char* notify_reason_name(NotifyReason r) {
  switch (r) {
    case NotifyReason::NewRecord: return "new-record";
    case NotifyReason::Modified: return "modified";
    case NotifyReason::NewTrustGroup: return "new-trust-group";
  }
  return "?";
}

struct Notification {
  std::string recipient;
  std::string record_uid;  // or opaque group id for NewTrustGroup
  NotifyReason reason = NotifyReason::NewRecord;
  std::set<std::string> matched_keywords;

  // serialized mailbox form: record_uid|reason|keywords(csv)
  std::string serialize() const {
    std::string out = record_uid + "|" + notify_reason_name(reason) + "|";
    bool first = true;
    for (const auto& k : matched_keywords) {
      if (!first) out += ',';
      out += k;
      first = false;
    }
    return out;
  }
};

struct TransparencyEvent {
  enum class Kind : std::uint8_t { TokenIssued = 0, Retrieval = 1 } kind = Kind::TokenIssued;
  std::string apt_ref;
  std::string requester;
  Privilege privilege = Privilege::Read;
  Tick tick = 0;
};

namespace payload {

struct CyberThreat {
  std::string record_uid;
  std::string owner;
  std::map<std::uint8_t, std::vector<std::string>> privilege_policies;
  Digest content_digest;
  std::string description;
  std::set<std::string> keywords;
  std::string server_address;
  std::string contract_id;  // empty when untagged
  std::string contract_terms;

  Bytes encode() const {
    ByteWriter w;
    w.str(record_uid);
    w.str(owner);
    w.u32(static_cast<std::uint32_t>(privilege_policies.size()));
    for (const auto& [priv, policies] : privilege_policies) {
      w.u8(priv);
      w.u32(static_cast<std::uint32_t>(policies.size()));
      for (const auto& p : policies) w.str(p);
    }
    w.raw(content_digest.bytes.data(), content_digest.bytes.size());
    w.str(description);
    encode_string_set(w, keywords);
    w.str(server_address);
    w.str(contract_id);
    w.str(contract_terms);
    return w.take();
  }

  static CyberThreat decode(const Bytes& b) {
    ByteReader r(b);
    CyberThreat p;
    p.record_uid = r.str();
    p.owner = r.str();
    std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
      std::uint8_t priv = r.u8();
      std::uint32_t m = r.u32();
      auto& list = p.privilege_policies[priv];
      for (std::uint32_t j = 0; j < m; ++j) list.push_back(r.str());
    }
    Bytes digest(32);
    for (auto& byte : digest) byte = r.u8();
    p.content_digest = Digest::from_bytes(digest);
    p.description = r.str();
    p.keywords = decode_string_set(r);
    p.server_address = r.str();
    p.contract_id = r.str();
    p.contract_terms = r.str();
    return p;
  }
};

struct AccessTokenBody {
  std::string apt_ref;
  std::string requester;
  PublicKey requester_key;
  std::uint8_t privilege = 0;
  std::string record_uid;
  Tick expiration = 0;
  std::vector<std::string> badge_refs;

  Bytes encode() const {
    ByteWriter w;
    w.str(apt_ref);
    w.str(requester);
    w.raw(requester_key.bytes.data(), requester_key.bytes.size());
    w.u8(privilege);
    w.str(record_uid);
    w.u64(expiration);
    w.u32(static_cast<std::uint32_t>(badge_refs.size()));
    for (const auto& ref : badge_refs) w.str(ref);
    return w.take();
  }

  static AccessTokenBody decode(const Bytes& b) {
    ByteReader r(b);
    AccessTokenBody p;
    p.apt_ref = r.str();
    p.requester = r.str();
    for (auto& byte : p.requester_key.bytes) byte = r.u8();
    p.privilege = r.u8();
    p.record_uid = r.str();
    p.expiration = r.u64();
    std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) p.badge_refs.push_back(r.str());
    return p;
  }
};

struct AccessDataBody {
  std::string record_uid;
  std::string apt_ref;
  std::string requester;
  std::uint8_t operation = 0;
  Tick tick = 0;

  Bytes encode() const {
    ByteWriter w;
    w.str(record_uid);
    w.str(apt_ref);
    w.str(requester);
    w.u8(operation);
    w.u64(tick);
    return w.take();
  }

  static AccessDataBody decode(const Bytes& b) {
    ByteReader r(b);
    AccessDataBody p;
    p.record_uid = r.str();
    p.apt_ref = r.str();
    p.requester = r.str();
    p.operation = r.u8();
    p.tick = r.u64();
    return p;
  }
};

}  // namespace payload

struct DataRecordDraft {
  std::string record_uid;
  std::map<Privilege, std::vector<std::string>> privilege_policy_map;
  Digest content_digest;
  std::string description;
  std::set<std::string> keywords;
  std::string server_address;
  std::optional<std::string> legal_terms;
};

// The Activity Blockchain Network: permission contract and data management
// contract, plus notification mailboxes and the incentive engine whose
// transactions live on this chain.
class ActivityNetwork {
 public:
  // Everything the activity-side contracts need from the identity network.
  struct IdentityFacade {
    std::function<std::optional<ProfileBadge>(const std::string&)> badge;
    std::function<bool(const std::string&)> pseudonym_active;
    std::function<bool(const std::string&)> policy_exists;
    std::function<void(const std::string&)> on_publish;  // cti_contribution bump
  };

  ActivityNetwork(SimClock* clock, const SimConfig* config)
      : ledger_(NetworkTag::Activity),
        clock_(clock),
        config_(config),
        incentives_(
            config,
            [this](TxType type, const std::string& submitter, Bytes body, const KeyPair& keys) {
              return submit_and_confirm_unlocked(type, submitter, std::move(body), keys);
            },
            [this](const std::string& consumer, const std::string& record_uid) {
              return has_retrieval_unlocked(consumer, record_uid);
            },
            [this](const std::string& record_uid) -> std::optional<std::string> {
              auto it = records_.find(record_uid);
              if (it == records_.end()) return std::nullopt;
              return it->second.owner;
            }) {
    facade_.badge = [](const std::string&) { return std::nullopt; };
    facade_.pseudonym_active = [](const std::string&) { return true; };
    facade_.policy_exists = [](const std::string&) { return true; };
    facade_.on_publish = [](const std::string&) {};
  }

  ActivityNetwork(const ActivityNetwork&) = delete;
  ActivityNetwork& operator=(const ActivityNetwork&) = delete;

  void use_shared_mutex(std::shared_ptr<std::recursive_mutex> m) { mu_ = std::move(m); }
  void set_identity_facade(IdentityFacade facade) { facade_ = std::move(facade); }

  void add_member(const std::string& id, const PublicKey& key, MemberRole role) {
    std::scoped_lock lock(*mu_);
    ledger_.add_member(id, key, role);
  }

  // --- data management contract ---------------------------------------------

  Result<std::string> publish_data(const std::string& owner, const DataRecordDraft& draft,
                                   const KeyPair& signer) {
    std::scoped_lock lock(*mu_);
    if (!facade_.pseudonym_active(owner))
      return Result<std::string>::failure(Errc::RevokedIdentity, owner);
    if (auto why = malformed_reason(draft); !why.empty())
      return Result<std::string>::failure(Errc::MalformedRecord, why);

    payload::CyberThreat p;
    p.record_uid = draft.record_uid;
    p.owner = owner;
    for (const auto& [priv, policies] : draft.privilege_policy_map)
      p.privilege_policies[static_cast<std::uint8_t>(priv)] = policies;
    p.content_digest = draft.content_digest;
    p.description = draft.description;
    p.keywords = draft.keywords;
    p.server_address = draft.server_address;
    if (draft.legal_terms) {
      p.contract_id = "lc-" + sha256("contract:" + draft.record_uid).prefix_hex(8);
      p.contract_terms = *draft.legal_terms;
    }
    auto r = submit_and_confirm_unlocked(TxType::CyberThreatAssociation, owner, p.encode(),
                                         signer);
    if (!r.ok()) return Result<std::string>(r.error());
    return draft.record_uid;
  }

  std::optional<DataRecord> record(const std::string& record_uid) const {
    std::scoped_lock lock(*mu_);
    auto it = records_.find(record_uid);
    if (it == records_.end()) return std::nullopt;
    return it->second;
  }

  // Keyword search over record tags: case-insensitive exact-token match,
  // newest first, ties by record uid.
  std::vector<std::string> search(const std::string& caller,
                                  const std::set<std::string>& query) const {
    std::scoped_lock lock(*mu_);
    if (!ledger_.is_member(caller)) return {};
    std::set<std::string> lowered;
    for (const auto& k : query) lowered.insert(lowercase(k));
    std::vector<const DataRecord*> hits;
    for (const auto& [uid, rec] : records_) {
      bool match = false;
      for (const auto& k : lowered)
        if (rec.keywords.count(k)) match = true;
      if (match) hits.push_back(&rec);
    }
    std::sort(hits.begin(), hits.end(), [](const DataRecord* a, const DataRecord* b) {
      if (a->published_at != b->published_at) return a->published_at > b->published_at;
      return a->record_uid < b->record_uid;
    });
    std::vector<std::string> out;
    for (const auto* rec : hits) out.push_back(rec->record_uid);
    return out;
  }

  void subscribe(const std::string& addr, const std::set<std::string>& keywords) {
    std::scoped_lock lock(*mu_);
    auto& interests = interests_[addr];
    for (const auto& k : keywords) interests.insert(lowercase(k));
  }

  std::vector<Notification> drain_notifications(const std::string& addr) {
    std::scoped_lock lock(*mu_);
    auto it = mailboxes_.find(addr);
    if (it == mailboxes_.end()) return {};
    std::vector<Notification> out = std::move(it->second);
    mailboxes_.erase(it);
    return out;
  }

  // Trust groups are opaque ids here; announcing one only fans out
  // notifications, nothing lands on the chain.
  void announce_trust_group(const std::string& group_id, const std::set<std::string>& keywords) {
    std::scoped_lock lock(*mu_);
    std::set<std::string> lowered;
    for (const auto& k : keywords) lowered.insert(lowercase(k));
    notify_unlocked(group_id, NotifyReason::NewTrustGroup, lowered);
  }

  // --- permission contract ----------------------------------------------------

  Result<std::string> access_permission_request(const std::string& requester,
                                                const std::string& record_uid,
                                                Privilege privilege,
                                                const std::vector<std::string>& badge_refs,
                                                const PublicKey& requester_key,
                                                const KeyPair& signer,
                                                std::optional<Tick> requested_ttl = {}) {
    std::scoped_lock lock(*mu_);
    auto rec = records_.find(record_uid);
    if (rec == records_.end())
      return Result<std::string>::failure(Errc::UnknownRecord, record_uid);
    auto required = rec->second.privilege_policy_map.find(privilege);
    if (required == rec->second.privilege_policy_map.end())
      return Result<std::string>::failure(Errc::UnknownPrivilege, privilege_name(privilege));
    if (!facade_.pseudonym_active(requester))
      return Result<std::string>::failure(Errc::RevokedIdentity, requester);

    std::set<std::string> covered;
    for (const auto& ref : badge_refs) {
      auto badge = facade_.badge(ref);
      if (!badge)
        return Result<std::string>::failure(Errc::InvalidBadge, ref + " not found");
      if (!badge->valid)
        return Result<std::string>::failure(Errc::InvalidBadge, ref + " revoked");
      if (badge->holder != requester)
        return Result<std::string>::failure(Errc::InvalidBadge, ref + " held by another party");
      covered.insert(badge->policy_id);
    }
    for (const auto& policy_id : required->second)
      if (!covered.count(policy_id))
        return Result<std::string>::failure(Errc::PolicyCoverageIncomplete, policy_id);

    Tick ttl = config_->apt_ttl;
    if (requested_ttl && *requested_ttl < ttl) ttl = *requested_ttl;

    payload::AccessTokenBody p;
    p.apt_ref = "apt-" + sha256("apt:" + requester + ":" + record_uid + ":" +
                                std::to_string(apt_seq_++))
                             .prefix_hex(8);
    p.requester = requester;
    p.requester_key = requester_key;
    p.privilege = static_cast<std::uint8_t>(privilege);
    p.record_uid = record_uid;
    p.expiration = clock_->now + ttl;
    p.badge_refs = badge_refs;
    auto r = submit_and_confirm_unlocked(TxType::AccessToken, requester, p.encode(), signer);
    if (!r.ok()) return Result<std::string>(r.error());
    return p.apt_ref;
  }

  Result<AccessPermissionToken> get_apt(const std::string& apt_ref) const {
    std::scoped_lock lock(*mu_);
    auto it = apts_.find(apt_ref);
    if (it == apts_.end())
      return Result<AccessPermissionToken>::failure(Errc::UnknownAPT, apt_ref);
    return it->second;
  }

  // Server-side retrieval log entry; one per successful payload hand-off.
  Result<Digest> log_retrieval(const std::string& server_id, const std::string& record_uid,
                               const std::string& apt_ref, const std::string& requester,
                               Privilege operation, Tick tick, const KeyPair& server_keys) {
    std::scoped_lock lock(*mu_);
    payload::AccessDataBody p;
    p.record_uid = record_uid;
    p.apt_ref = apt_ref;
    p.requester = requester;
    p.operation = static_cast<std::uint8_t>(operation);
    p.tick = tick;
    return submit_and_confirm_unlocked(TxType::AccessData, server_id, p.encode(), server_keys);
  }

  Result<std::vector<TransparencyEvent>> transparency_report(
      const std::string& caller, const std::string& record_uid) const {
    std::scoped_lock lock(*mu_);
    auto rec = records_.find(record_uid);
    if (rec == records_.end())
      return Result<std::vector<TransparencyEvent>>::failure(Errc::UnknownRecord, record_uid);
    if (rec->second.owner != caller)
      return Result<std::vector<TransparencyEvent>>::failure(Errc::NotOwner, caller);
    auto it = record_events_.find(record_uid);
    if (it == record_events_.end()) return std::vector<TransparencyEvent>{};
    return it->second;
  }

  bool has_retrieval(const std::string& requester, const std::string& record_uid) const {
    std::scoped_lock lock(*mu_);
    return has_retrieval_unlocked(requester, record_uid);
  }

  IncentiveEngine& incentives() { return incentives_; }
  const IncentiveEngine& incentives() const { return incentives_; }

  const Ledger& ledger() const { return ledger_; }
  Ledger& raw_ledger() { return ledger_; }

  void confirm_and_apply() {
    std::scoped_lock lock(*mu_);
    confirm_and_apply_unlocked();
  }

  // True when some published record lists the policy in a privilege map;
  // such policies are open for badge requests by any consumer.
  bool policy_in_use(const std::string& policy_id) const {
    std::scoped_lock lock(*mu_);
    for (const auto& [uid, rec] : records_)
      for (const auto& [priv, policies] : rec.privilege_policy_map)
        for (const auto& p : policies)
          if (p == policy_id) return true;
    return false;
  }

  static std::string lowercase(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  }

 private:
  std::string malformed_reason(const DataRecordDraft& draft) const {
    if (draft.record_uid.empty()) return "empty record uid";
    if (records_.count(draft.record_uid)) return "record uid already exists";
    if (draft.privilege_policy_map.empty()) return "privilege map is empty";
    for (const auto& [priv, policies] : draft.privilege_policy_map) {
      if (policies.empty()) return std::string("no policies for ") + privilege_name(priv);
      for (const auto& p : policies)
        if (!facade_.policy_exists(p)) return "unknown policy " + p;
    }
    if (draft.content_digest.is_zero()) return "missing content digest";
    if (draft.keywords.empty()) return "no keywords";
    for (const auto& k : draft.keywords)
      if (k != lowercase(k)) return "keyword not lowercase: " + k;
    if (draft.server_address.empty()) return "missing server address";
    return "";
  }

  Result<Digest> submit_and_confirm_unlocked(TxType type, const std::string& submitter,
                                             Bytes body, const KeyPair& keys) {
    auto r = ledger_.submit(Transaction::make(type, submitter, std::move(body), keys,
                                              clock_->now));
    if (!r.ok()) return r;
    confirm_and_apply_unlocked();
    return r;
  }

  void confirm_and_apply_unlocked() {
    ledger_.confirm_receipt();
    while (applied_blocks_ < ledger_.chain().size()) {
      for (const auto& tx : ledger_.chain()[applied_blocks_].confirmed) apply_unlocked(tx);
      ++applied_blocks_;
    }
  }

  void apply_unlocked(const Transaction& tx) {
    switch (tx.type) {
      case TxType::CyberThreatAssociation: {
        auto p = payload::CyberThreat::decode(tx.payload);
        DataRecord rec;
        rec.record_uid = p.record_uid;
        rec.owner = p.owner;
        for (const auto& [priv, policies] : p.privilege_policies)
          rec.privilege_policy_map[static_cast<Privilege>(priv)] = policies;
        rec.content_digest = p.content_digest;
        rec.description = p.description;
        rec.keywords = p.keywords;
        rec.server_address = p.server_address;
        rec.published_at = tx.timestamp;
        if (!p.contract_id.empty()) {
          rec.legal_contract_id = p.contract_id;
          LegalContract contract;
          contract.contract_id = p.contract_id;
          contract.record_uid = p.record_uid;
          contract.terms_text = p.contract_terms;
          incentives_.register_contract(contract);
        }
        records_[p.record_uid] = rec;
        notify_unlocked(p.record_uid, NotifyReason::NewRecord, p.keywords);
        facade_.on_publish(p.owner);
        break;
      }
      case TxType::AccessToken: {
        auto p = payload::AccessTokenBody::decode(tx.payload);
        AccessPermissionToken apt;
        apt.apt_ref = p.apt_ref;
        apt.requester = p.requester;
        apt.requester_public_key = p.requester_key;
        apt.privilege = static_cast<Privilege>(p.privilege);
        apt.record_uid = p.record_uid;
        apt.expiration = p.expiration;
        apt.issued_at = tx.timestamp;
        apt.badge_refs = p.badge_refs;
        apts_[p.apt_ref] = apt;
        record_events_[p.record_uid].push_back(TransparencyEvent{
            TransparencyEvent::Kind::TokenIssued, p.apt_ref, p.requester, apt.privilege,
            tx.timestamp});
        break;
      }
      case TxType::AccessData: {
        auto p = payload::AccessDataBody::decode(tx.payload);
        record_events_[p.record_uid].push_back(TransparencyEvent{
            TransparencyEvent::Kind::Retrieval, p.apt_ref, p.requester,
            static_cast<Privilege>(p.operation), p.tick});
        retrievals_.insert({p.requester, p.record_uid});
        break;
      }
      case TxType::KarmaTransfer:
        incentives_.apply_karma(payload::Karma::decode(tx.payload));
        break;
      case TxType::RatingSubmission:
        incentives_.apply_rating(payload::Rating::decode(tx.payload));
        break;
      case TxType::LegalSignature:
        incentives_.apply_legal(payload::Legal::decode(tx.payload), tx.timestamp);
        break;
      default:
        throw std::runtime_error("identity transaction confirmed on activity network");
    }
  }

  void notify_unlocked(const std::string& record_uid, NotifyReason reason,
                       const std::set<std::string>& keywords) {
    for (const auto& [addr, interests] : interests_) {
      std::set<std::string> matched;
      for (const auto& k : keywords)
        if (interests.count(k)) matched.insert(k);
      if (!matched.empty())
        mailboxes_[addr].push_back(Notification{addr, record_uid, reason, matched});
    }
  }

  bool has_retrieval_unlocked(const std::string& requester, const std::string& record_uid) const {
    return retrievals_.count({requester, record_uid}) != 0;
  }

  Ledger ledger_;
  SimClock* clock_;
  const SimConfig* config_;
  mutable std::shared_ptr<std::recursive_mutex> mu_ =
      std::make_shared<std::recursive_mutex>();
  IdentityFacade facade_;
  IncentiveEngine incentives_;

  std::map<std::string, DataRecord> records_;
  std::map<std::string, AccessPermissionToken> apts_;
  std::map<std::string, std::vector<TransparencyEvent>> record_events_;
  std::map<std::string, std::set<std::string>> interests_;
  std::map<std::string, std::vector<Notification>> mailboxes_;
  std::set<std::pair<std::string, std::string>> retrievals_;
  std::uint64_t apt_seq_ = 0;
  std::size_t applied_blocks_ = 0;
};

}  // namespace trade
