#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "trade/config.hpp"
#include "trade/ledger.hpp"
#include "trade/policy.hpp"

namespace trade {

struct OrganizationProfile {
  std::string name;
  std::int64_t employees = 0;
  std::int64_t annual_revenue = 0;
  std::string hq_location;
  std::set<std::string> identity_tags;
  AttributeSet extra_attrs;  // e.g. credit_rate, gdpr_compliant

  // Flattened view used for policy evaluation. The real name is NOT an
  // attribute: nothing evaluated or serialized on-chain may carry it.
  AttributeSet attributes() const {
    AttributeSet a = extra_attrs;
    a["employees"] = employees;
    a["revenue"] = annual_revenue;
    a["hq"] = hq_location;
    return a;
  }
};

enum class IdentityStatus : std::uint8_t { Active = 0, Revoked = 1 };

struct PseudoIdentity {
  std::string address;  // 20-byte digest prefix of public_key, hex
  PublicKey public_key;
  std::set<std::string> identity_tags;
  // Incremented by the data-publication flow; mirrored here because the
  // pseudo-identity record is where consumers look it up.
  std::uint64_t cti_contribution = 0;
  IdentityStatus status = IdentityStatus::Active;
  std::string issuer;  // registrar id
  Digest profile_id;   // opaque link to the on-chain organization profile
};

struct ProfileBadge {
  std::string badge_id;
  std::string holder;  // pseudonym address
  std::string policy_id;
  bool valid = true;  // false is terminal
  Tick issued_at = 0;
};

enum class VoteAction : std::uint8_t { Revoke = 0, AddViolation = 1, ExposeIdentity = 2 };

inline const char* vote_action_name(VoteAction a) {
  switch (a) {
    case VoteAction::Revoke: return "revoke";
    case VoteAction::AddViolation: return "violation";
    case VoteAction::ExposeIdentity: return "expose";
  }
  return "?";
}

struct ConsortiumVote {
  std::string subject;  // pseudonym address
  VoteAction action = VoteAction::Revoke;
  std::set<std::string> voters;  // registrar ids
  bool executed = false;
  std::string note;  // violation text / report reference
};

struct VoteOutcome {
  enum class State { Pending, Executed } state = State::Pending;
  std::size_t votes = 0;
  std::size_t threshold = 0;
  // Only filled on the vote that crosses the threshold of an ExposeIdentity
  // action, and only for the caller: the name itself never reaches a ledger.
  std::optional<std::string> exposed_name;
};

struct NewIdentity {
  std::string address;
  KeyPair key_pair;
};

struct DeployOutcome {
  std::string policy_id;
  bool vacuous_warning = false;
};

struct BadgeIssue {
  std::string badge_ref;
  bool reused = false;
};

struct PolicyChange {
  enum class Kind { Modify, Delete } kind = Kind::Modify;
  std::optional<RuleNode> new_terms;
  std::optional<std::string> new_description;
  std::optional<std::set<std::string>> new_grantees;
};

namespace payload {

inline void encode_value(ByteWriter& w, const Value& v) {
  if (const auto* s = std::get_if<std::string>(&v)) {
    w.u8(0);
    w.str(*s);
  } else if (const auto* i = std::get_if<std::int64_t>(&v)) {
    w.u8(1);
    w.i64(*i);
  } else {
    w.u8(2);
    w.boolean(std::get<bool>(v));
  }
}

inline Value decode_value(ByteReader& r) {
  switch (r.u8()) {
    case 0: return r.str();
    case 1: return r.i64();
    default: return r.boolean();
  }
}

inline void encode_attrs(ByteWriter& w, const AttributeSet& attrs) {
  w.u32(static_cast<std::uint32_t>(attrs.size()));
  for (const auto& [k, v] : attrs) {  // std::map: already sorted
    w.str(k);
    encode_value(w, v);
  }
}

inline AttributeSet decode_attrs(ByteReader& r) {
  AttributeSet attrs;
  std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string k = r.str();
    attrs[k] = decode_value(r);
  }
  return attrs;
}

inline void encode_string_set(ByteWriter& w, const std::set<std::string>& s) {
  w.u32(static_cast<std::uint32_t>(s.size()));
  for (const auto& v : s) w.str(v);
}

inline std::set<std::string> decode_string_set(ByteReader& r) {
  std::set<std::string> out;
  std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) out.insert(r.str());
  return out;
}

struct OriginalIdentity {
  Digest profile_id;
  std::uint32_t version = 1;
  AttributeSet attrs;
  std::set<std::string> identity_tags;
  std::string leaked_name;  // test-only misconfiguration, see SimConfig

  Bytes encode() const {
    ByteWriter w;
    w.raw(profile_id.bytes.data(), profile_id.bytes.size());
    w.u32(version);
    encode_attrs(w, attrs);
    encode_string_set(w, identity_tags);
    w.str(leaked_name);
    return w.take();
  }

  static OriginalIdentity decode(const Bytes& b) {
    ByteReader r(b);
    OriginalIdentity p;
    Bytes id(32);
    for (auto& byte : id) byte = r.u8();
    p.profile_id = Digest::from_bytes(id);
    p.version = r.u32();
    p.attrs = decode_attrs(r);
    p.identity_tags = decode_string_set(r);
    p.leaked_name = r.str();
    return p;
  }
};

struct BlockchainIdentity {
  std::string address;
  PublicKey public_key;
  std::set<std::string> identity_tags;
  std::string issuer;
  Digest profile_id;

  Bytes encode() const {
    ByteWriter w;
    w.str(address);
    w.raw(public_key.bytes.data(), public_key.bytes.size());
    encode_string_set(w, identity_tags);
    w.str(issuer);
    w.raw(profile_id.bytes.data(), profile_id.bytes.size());
    return w.take();
  }

  static BlockchainIdentity decode(const Bytes& b) {
    ByteReader r(b);
    BlockchainIdentity p;
    p.address = r.str();
    for (auto& byte : p.public_key.bytes) byte = r.u8();
    p.identity_tags = decode_string_set(r);
    p.issuer = r.str();
    Bytes id(32);
    for (auto& byte : id) byte = r.u8();
    p.profile_id = Digest::from_bytes(id);
    return p;
  }
};

struct Policy {
  enum class Action : std::uint8_t { Create = 0, Modify = 1, Delete = 2 };
  Action action = Action::Create;
  std::string policy_id;
  std::string owner;
  PolicyKind kind = PolicyKind::Sharing;
  std::string description;
  std::string terms_text;  // canonical print of the rule tree
  std::set<std::string> grantees;

  Bytes encode() const {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(action));
    w.str(policy_id);
    w.str(owner);
    w.u8(static_cast<std::uint8_t>(kind));
    w.str(description);
    w.str(terms_text);
    encode_string_set(w, grantees);
    return w.take();
  }

  static Policy decode(const Bytes& b) {
    ByteReader r(b);
    Policy p;
    p.action = static_cast<Action>(r.u8());
    p.policy_id = r.str();
    p.owner = r.str();
    p.kind = static_cast<PolicyKind>(r.u8());
    p.description = r.str();
    p.terms_text = r.str();
    p.grantees = decode_string_set(r);
    return p;
  }
};

struct Badge {
  std::string badge_id;
  std::string holder;
  std::string policy_id;

  Bytes encode() const {
    ByteWriter w;
    w.str(badge_id);
    w.str(holder);
    w.str(policy_id);
    return w.take();
  }

  static Badge decode(const Bytes& b) {
    ByteReader r(b);
    Badge p;
    p.badge_id = r.str();
    p.holder = r.str();
    p.policy_id = r.str();
    return p;
  }
};

struct Sanction {
  std::string subject;
  std::string note;

  Bytes encode() const {
    ByteWriter w;
    w.str(subject);
    w.str(note);
    return w.take();
  }

  static Sanction decode(const Bytes& b) {
    ByteReader r(b);
    Sanction p;
    p.subject = r.str();
    p.note = r.str();
    return p;
  }
};

struct Exposure {
  std::string subject;
  std::string reporter;

  Bytes encode() const {
    ByteWriter w;
    w.str(subject);
    w.str(reporter);
    return w.take();
  }

  static Exposure decode(const Bytes& b) {
    ByteReader r(b);
    Exposure p;
    p.subject = r.str();
    p.reporter = r.str();
    return p;
  }
};

}  // namespace payload

// The Identity Blockchain Network: registration contract, policy management
// contract and policy validator contract, plus the registrar consortium with
// its off-chain identity mappings.
class IdentityNetwork {
 public:
  struct Registrar {
    std::string id;
    KeyPair keys;
    // Off-chain store. Never serialized into any ledger payload.
    std::map<std::string, std::vector<std::string>> mapping;  // real name -> addresses
    std::map<std::string, Digest> profile_ids;
    std::map<std::string, std::set<std::string>> tags;  // captured at registration
  };

  struct StoredProfile {
    Digest profile_id;
    std::uint32_t version = 0;
    AttributeSet attrs;
    std::set<std::string> identity_tags;
    std::vector<std::string> violations;
  };

  IdentityNetwork(SimClock* clock, const SimConfig* config)
      : ledger_(NetworkTag::Identity), clock_(clock), config_(config) {
    verify_profile_ = [](const OrganizationProfile& p) {
      return !p.name.empty() && !p.hq_location.empty() && p.employees >= 0 &&
             p.annual_revenue >= 0;
    };
  }

  IdentityNetwork(const IdentityNetwork&) = delete;
  IdentityNetwork& operator=(const IdentityNetwork&) = delete;

  // Cross-component calls (attribute injection, badge fetches) re-enter
  // through whichever component started; the simulation shares one recursive
  // mutex across all of them so the whole call tree serializes as a unit.
  void use_shared_mutex(std::shared_ptr<std::recursive_mutex> m) { mu_ = std::move(m); }

  // --- wiring -------------------------------------------------------------

  void set_verify_profile(std::function<bool(const OrganizationProfile&)> fn) {
    verify_profile_ = std::move(fn);
  }

  // Called whenever a pseudo-identity lands on the chain; the simulation
  // uses it to open the activity network to the new member.
  void set_on_new_pseudonym(std::function<void(const std::string&, const PublicKey&)> fn) {
    on_new_pseudonym_ = std::move(fn);
  }

  // Extra attributes merged into the organization profile at badge
  // validation time (reputation, for one).
  void set_attribute_injector(std::function<void(const std::string&, AttributeSet&)> fn) {
    attribute_injector_ = std::move(fn);
  }

  // Whether a policy is referenced by a published data record. Badge
  // requests against such policies are open to anyone; everything else
  // needs ownership or an explicit grant.
  void set_policy_open_check(std::function<bool(const std::string&)> fn) {
    policy_open_check_ = std::move(fn);
  }

  void add_registrar(const std::string& id, const KeyPair& keys) {
    std::scoped_lock lock(*mu_);
    registrars_[id] = Registrar{id, keys, {}, {}, {}};
    ledger_.add_member(id, keys.public_key, MemberRole::Registrar);
  }

  std::size_t registrar_count() const {
    std::scoped_lock lock(*mu_);
    return registrars_.size();
  }

  std::size_t vote_threshold() const {
    std::scoped_lock lock(*mu_);
    return threshold_unlocked();
  }

  // --- registration contract ----------------------------------------------

  Result<NewIdentity> register_organization(const std::string& registrar_id,
                                            const OrganizationProfile& profile) {
    std::scoped_lock lock(*mu_);
    auto reg = registrars_.find(registrar_id);
    if (reg == registrars_.end())
      return Result<NewIdentity>::failure(Errc::UnknownRegistrar, registrar_id);
    if (!verify_profile_(profile))
      return Result<NewIdentity>::failure(Errc::VerificationFailed, profile.name);

    Digest profile_id = profile_id_for(profile.name);
    payload::OriginalIdentity original;
    original.profile_id = profile_id;
    original.version = profile_version_unlocked(profile_id) + 1;
    original.attrs = profile.attributes();
    original.identity_tags = profile.identity_tags;
    if (config_->leak_real_names) original.leaked_name = profile.name;

    KeyPair keys = fresh_keys_unlocked();
    payload::BlockchainIdentity pseudo;
    pseudo.address = address_of(keys.public_key);
    pseudo.public_key = keys.public_key;
    pseudo.identity_tags = profile.identity_tags;
    pseudo.issuer = registrar_id;
    pseudo.profile_id = profile_id;

    auto submitted = submit_unlocked(TxType::OriginalIdentity, registrar_id, original.encode(),
                                     reg->second.keys);
    if (!submitted.ok()) return Result<NewIdentity>(submitted.error());
    submitted = submit_unlocked(TxType::BlockchainIdentity, registrar_id, pseudo.encode(),
                                reg->second.keys);
    if (!submitted.ok()) return Result<NewIdentity>(submitted.error());
    confirm_and_apply_unlocked();

    reg->second.mapping[profile.name].push_back(pseudo.address);
    reg->second.profile_ids[profile.name] = profile_id;
    reg->second.tags[profile.name] = profile.identity_tags;
    return NewIdentity{pseudo.address, keys};
  }

  Result<NewIdentity> issue_temporary_identity(const std::string& registrar_id,
                                               const std::string& real_name) {
    std::scoped_lock lock(*mu_);
    auto reg = registrars_.find(registrar_id);
    if (reg == registrars_.end())
      return Result<NewIdentity>::failure(Errc::UnknownRegistrar, registrar_id);
    auto entry = reg->second.mapping.find(real_name);
    if (entry == reg->second.mapping.end())
      return Result<NewIdentity>::failure(Errc::UnknownOrganization, real_name);

    KeyPair keys = fresh_keys_unlocked();
    payload::BlockchainIdentity pseudo;
    pseudo.address = address_of(keys.public_key);
    pseudo.public_key = keys.public_key;
    pseudo.identity_tags = reg->second.tags[real_name];
    pseudo.issuer = registrar_id;
    pseudo.profile_id = reg->second.profile_ids.at(real_name);

    auto submitted = submit_unlocked(TxType::BlockchainIdentity, registrar_id, pseudo.encode(),
                                     reg->second.keys);
    if (!submitted.ok()) return Result<NewIdentity>(submitted.error());
    confirm_and_apply_unlocked();

    entry->second.push_back(pseudo.address);
    return NewIdentity{pseudo.address, keys};
  }

  Result<std::size_t> on_profile_update(const std::string& real_name,
                                        const OrganizationProfile& new_profile) {
    std::scoped_lock lock(*mu_);
    Registrar* reg = nullptr;
    for (auto& [id, r] : registrars_)
      if (r.mapping.count(real_name)) {
        reg = &r;
        break;
      }
    if (!reg) return Result<std::size_t>::failure(Errc::UnknownOrganization, real_name);

    Digest profile_id = reg->profile_ids.at(real_name);
    std::size_t valid_before = 0;
    for (const auto& [ref, badge] : badges_)
      if (badge.valid && holder_profile_unlocked(badge.holder) == profile_id) ++valid_before;

    payload::OriginalIdentity update;
    update.profile_id = profile_id;
    update.version = profile_version_unlocked(profile_id) + 1;
    update.attrs = new_profile.attributes();
    update.identity_tags = new_profile.identity_tags;
    if (config_->leak_real_names) update.leaked_name = real_name;
    auto submitted =
        submit_unlocked(TxType::OriginalIdentity, reg->id, update.encode(), reg->keys);
    if (!submitted.ok()) return Result<std::size_t>(submitted.error());
    confirm_and_apply_unlocked();
    return valid_before;
  }

  // --- policy management contract -----------------------------------------

  Result<DeployOutcome> deploy_policy(const std::string& owner, PolicyKind kind,
                                      const std::string& description, const RuleNode& terms,
                                      const std::set<std::string>& grantees,
                                      const KeyPair& signer) {
    std::scoped_lock lock(*mu_);
    auto* holder = find_pseudonym_unlocked(owner);
    if (!holder) return Result<DeployOutcome>::failure(Errc::UnknownSubmitter, owner);
    if (holder->status == IdentityStatus::Revoked)
      return Result<DeployOutcome>::failure(Errc::RevokedIdentity, owner);

    payload::Policy p;
    p.action = payload::Policy::Action::Create;
    p.policy_id = "pol-" + sha256("policy:" + owner + ":" + std::to_string(policy_seq_++))
                               .prefix_hex(8);
    p.owner = owner;
    p.kind = kind;
    p.description = description;
    p.terms_text = print_policy(terms);
    p.grantees = grantees;
    auto submitted = submit_unlocked(TxType::PolicyCreation, owner, p.encode(), signer);
    if (!submitted.ok()) return Result<DeployOutcome>(submitted.error());
    confirm_and_apply_unlocked();

    DeployOutcome out;
    out.policy_id = p.policy_id;
    auto vac = is_vacuous(terms, advisory_domain(terms));
    out.vacuous_warning = vac.ok() && vac.value();
    return out;
  }

  Result<Unit> modify_or_delete_policy(const std::string& caller, const std::string& policy_id,
                                       const PolicyChange& change, const KeyPair& signer) {
    std::scoped_lock lock(*mu_);
    auto it = policies_.find(policy_id);
    if (it == policies_.end()) return Status::failure(Errc::UnknownPolicy, policy_id);
    if (it->second.owner != caller) return Status::failure(Errc::NotOwner, caller);

    payload::Policy p;
    p.policy_id = policy_id;
    p.owner = caller;
    p.kind = it->second.kind;
    if (change.kind == PolicyChange::Kind::Delete) {
      p.action = payload::Policy::Action::Delete;
    } else {
      p.action = payload::Policy::Action::Modify;
      p.description = change.new_description.value_or(it->second.description);
      p.terms_text = print_policy(change.new_terms.value_or(it->second.terms));
      p.grantees = change.new_grantees.value_or(it->second.grantees);
    }
    auto submitted = submit_unlocked(TxType::PolicyCreation, caller, p.encode(), signer);
    if (!submitted.ok()) return Status(submitted.error());
    confirm_and_apply_unlocked();
    return ok_status();
  }

  // --- policy validator contract -------------------------------------------

  Result<BadgeIssue> request_profile_badge(const std::string& holder,
                                           const std::string& policy_id, const KeyPair& signer) {
    std::scoped_lock lock(*mu_);
    auto* pseudo = find_pseudonym_unlocked(holder);
    if (!pseudo) return Result<BadgeIssue>::failure(Errc::UnknownSubmitter, holder);
    if (pseudo->status == IdentityStatus::Revoked)
      return Result<BadgeIssue>::failure(Errc::RevokedIdentity, holder);
    auto pit = policies_.find(policy_id);
    if (pit == policies_.end())
      return Result<BadgeIssue>::failure(Errc::UnknownPolicy, policy_id);

    const PolicyDocument& policy = pit->second;
    bool granted = policy.owner == holder || policy.grantees.count(holder) ||
                   policy.grantees.count("*") ||
                   (policy_open_check_ && policy_open_check_(policy_id));
    if (!granted) return Result<BadgeIssue>::failure(Errc::NotGranted, policy_id);

    // Badge reuse: an existing valid badge for (holder, policy) is returned
    // as-is, with no new transaction.
    auto cached = badge_index_.find({holder, policy_id});
    if (cached != badge_index_.end()) {
      auto bit = badges_.find(cached->second);
      if (bit != badges_.end() && bit->second.valid)
        return BadgeIssue{cached->second, true};
    }

    AttributeSet attrs = attributes_for_unlocked(holder);
    auto verdict = evaluate(policy.terms, attrs);
    if (!verdict.ok())
      return Result<BadgeIssue>::failure(Errc::PolicyNotSatisfied,
                                         verdict.error().to_string());
    if (!verdict.value())
      return Result<BadgeIssue>::failure(Errc::PolicyNotSatisfied, policy_id);

    payload::Badge badge;
    badge.badge_id =
        "bdg-" + sha256("badge:" + holder + ":" + policy_id + ":" +
                        std::to_string(badge_seq_++))
                     .prefix_hex(8);
    badge.holder = holder;
    badge.policy_id = policy_id;
    auto submitted = submit_unlocked(TxType::ProfileBadge, holder, badge.encode(), signer);
    if (!submitted.ok()) return Result<BadgeIssue>(submitted.error());
    confirm_and_apply_unlocked();
    return BadgeIssue{badge.badge_id, false};
  }

  // --- consortium ----------------------------------------------------------

  Result<VoteOutcome> consortium_vote(const std::string& registrar_id, const std::string& subject,
                                      VoteAction action, const std::string& note = "") {
    std::scoped_lock lock(*mu_);
    auto reg = registrars_.find(registrar_id);
    if (reg == registrars_.end())
      return Result<VoteOutcome>::failure(Errc::UnknownRegistrar, registrar_id);

    auto& vote = votes_[{subject, action}];
    vote.subject = subject;
    vote.action = action;
    if (!note.empty()) vote.note = note;
    if (vote.voters.count(registrar_id))
      return Result<VoteOutcome>::failure(Errc::DuplicateVote, registrar_id);
    vote.voters.insert(registrar_id);

    VoteOutcome out;
    out.votes = vote.voters.size();
    out.threshold = threshold_unlocked();
    if (vote.executed || out.votes < out.threshold) {
      out.state = vote.executed ? VoteOutcome::State::Executed : VoteOutcome::State::Pending;
      return out;
    }

    // Threshold reached for the first time: the crossing vote executes the
    // action, exactly once.
    vote.executed = true;
    out.state = VoteOutcome::State::Executed;
    switch (action) {
      case VoteAction::Revoke: {
        payload::Sanction s{subject, vote.note};
        auto submitted = submit_unlocked(TxType::OrganizationRevocation, registrar_id, s.encode(),
                                         reg->second.keys);
        if (!submitted.ok()) return Result<VoteOutcome>(submitted.error());
        confirm_and_apply_unlocked();
        break;
      }
      case VoteAction::AddViolation: {
        payload::Sanction s{subject, vote.note.empty() ? "network policy violation" : vote.note};
        auto submitted = submit_unlocked(TxType::ViolationAddition, registrar_id, s.encode(),
                                         reg->second.keys);
        if (!submitted.ok()) return Result<VoteOutcome>(submitted.error());
        confirm_and_apply_unlocked();
        break;
      }
      case VoteAction::ExposeIdentity: {
        // Walk every registrar's off-chain store; the ledger only records
        // that an exposure happened.
        for (const auto& [rid, r] : registrars_) {
          for (const auto& [name, addrs] : r.mapping)
            for (const auto& a : addrs)
              if (a == subject) out.exposed_name = name;
        }
        payload::Exposure e{subject, vote.note};
        auto submitted = submit_unlocked(TxType::IdentityExposure, registrar_id, e.encode(),
                                         reg->second.keys);
        if (!submitted.ok()) return Result<VoteOutcome>(submitted.error());
        confirm_and_apply_unlocked();
        break;
      }
    }
    return out;
  }

  // --- queries ---------------------------------------------------------------

  std::optional<PseudoIdentity> pseudonym(const std::string& addr) const {
    std::scoped_lock lock(*mu_);
    const auto* p = find_pseudonym_unlocked(addr);
    if (!p) return std::nullopt;
    return *p;
  }

  bool pseudonym_active(const std::string& addr) const {
    std::scoped_lock lock(*mu_);
    const auto* p = find_pseudonym_unlocked(addr);
    return p && p->status == IdentityStatus::Active;
  }

  std::optional<PolicyDocument> policy(const std::string& policy_id) const {
    std::scoped_lock lock(*mu_);
    auto it = policies_.find(policy_id);
    if (it == policies_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<ProfileBadge> badge(const std::string& badge_ref) const {
    std::scoped_lock lock(*mu_);
    auto it = badges_.find(badge_ref);
    if (it == badges_.end()) return std::nullopt;
    return it->second;
  }

  AttributeSet attributes_for(const std::string& holder) const {
    std::scoped_lock lock(*mu_);
    return attributes_for_unlocked(holder);
  }

  std::vector<std::string> pseudonyms_of(const std::string& registrar_id,
                                         const std::string& real_name) const {
    std::scoped_lock lock(*mu_);
    auto reg = registrars_.find(registrar_id);
    if (reg == registrars_.end()) return {};
    auto it = reg->second.mapping.find(real_name);
    return it == reg->second.mapping.end() ? std::vector<std::string>{} : it->second;
  }

  std::vector<std::string> violations_of(const std::string& addr) const {
    std::scoped_lock lock(*mu_);
    const auto* p = find_pseudonym_unlocked(addr);
    if (!p) return {};
    auto it = profiles_.find(p->profile_id);
    return it == profiles_.end() ? std::vector<std::string>{} : it->second.violations;
  }

  void bump_contribution(const std::string& addr) {
    std::scoped_lock lock(*mu_);
    auto it = pseudonyms_.find(addr);
    if (it != pseudonyms_.end()) ++it->second.cti_contribution;
  }

  // Import one registrar's off-chain store, e.g. when an auditor replays a
  // consortium decision against exported mappings.
  Status adopt_mapping(const std::string& registrar_id, const std::string& real_name,
                       const std::vector<std::string>& addresses) {
    std::scoped_lock lock(*mu_);
    auto reg = registrars_.find(registrar_id);
    if (reg == registrars_.end()) return Status::failure(Errc::UnknownRegistrar, registrar_id);
    auto& stored = reg->second.mapping[real_name];
    stored.insert(stored.end(), addresses.begin(), addresses.end());
    reg->second.profile_ids.emplace(real_name, profile_id_for(real_name));
    return ok_status();
  }

  // Test/audit export of the off-chain stores:
  //   real_name TAB pseudo_address
  void export_mappings(std::ostream& os) const {
    std::scoped_lock lock(*mu_);
    std::vector<std::pair<std::string, std::string>> rows;
    for (const auto& [rid, reg] : registrars_)
      for (const auto& [name, addrs] : reg.mapping)
        for (const auto& a : addrs) rows.emplace_back(name, a);
    std::sort(rows.begin(), rows.end());
    for (const auto& [name, addr] : rows) os << name << '\t' << addr << '\n';
  }

  const Ledger& ledger() const { return ledger_; }
  Ledger& raw_ledger() { return ledger_; }

  void confirm_and_apply() {
    std::scoped_lock lock(*mu_);
    confirm_and_apply_unlocked();
  }

  static Digest profile_id_for(const std::string& real_name) {
    return sha256("org-profile:" + real_name);
  }

 private:
  const PseudoIdentity* find_pseudonym_unlocked(const std::string& addr) const {
    auto it = pseudonyms_.find(addr);
    return it == pseudonyms_.end() ? nullptr : &it->second;
  }

  std::uint32_t profile_version_unlocked(const Digest& profile_id) const {
    auto it = profiles_.find(profile_id);
    return it == profiles_.end() ? 0 : it->second.version;
  }

  Digest holder_profile_unlocked(const std::string& addr) const {
    const auto* p = find_pseudonym_unlocked(addr);
    return p ? p->profile_id : Digest{};
  }

  AttributeSet attributes_for_unlocked(const std::string& holder) const {
    AttributeSet attrs;
    const auto* p = find_pseudonym_unlocked(holder);
    if (p) {
      auto it = profiles_.find(p->profile_id);
      if (it != profiles_.end()) attrs = it->second.attrs;
    }
    if (attribute_injector_) attribute_injector_(holder, attrs);
    return attrs;
  }

  std::size_t threshold_unlocked() const {
    std::size_t n = registrars_.size();
    return (2 * n + 2) / 3;  // ceil(2n/3)
  }

  KeyPair fresh_keys_unlocked() {
    ByteWriter w;
    w.str("pseudonym-key");
    w.u64(config_->seed);
    w.u64(key_seq_++);
    return KeyPair::from_seed(sha256(w.data()));
  }

  Result<Digest> submit_unlocked(TxType type, const std::string& submitter, Bytes body,
                                 const KeyPair& signer) {
    return ledger_.submit(Transaction::make(type, submitter, std::move(body), signer,
                                            clock_->now));
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
      case TxType::OriginalIdentity: {
        auto p = payload::OriginalIdentity::decode(tx.payload);
        auto& stored = profiles_[p.profile_id];
        bool is_update = stored.version != 0;
        stored.profile_id = p.profile_id;
        stored.version = p.version;
        stored.attrs = p.attrs;
        stored.identity_tags = p.identity_tags;
        if (is_update) {
          // Any profile change invalidates every badge the organization's
          // pseudonyms hold.
          for (auto& [ref, badge] : badges_)
            if (badge.valid && holder_profile_unlocked(badge.holder) == p.profile_id)
              badge.valid = false;
        }
        break;
      }
      case TxType::BlockchainIdentity: {
        auto p = payload::BlockchainIdentity::decode(tx.payload);
        PseudoIdentity id;
        id.address = p.address;
        id.public_key = p.public_key;
        id.identity_tags = p.identity_tags;
        id.status = IdentityStatus::Active;
        id.issuer = p.issuer;
        id.profile_id = p.profile_id;
        pseudonyms_[p.address] = id;
        ledger_.add_member(p.address, p.public_key, MemberRole::Client);
        if (on_new_pseudonym_) on_new_pseudonym_(p.address, p.public_key);
        break;
      }
      case TxType::PolicyCreation: {
        auto p = payload::Policy::decode(tx.payload);
        if (p.action == payload::Policy::Action::Delete) {
          policies_.erase(p.policy_id);
          for (auto& [ref, badge] : badges_)
            if (badge.policy_id == p.policy_id) badge.valid = false;
          break;
        }
        PolicyDocument doc;
        doc.policy_id = p.policy_id;
        doc.owner = p.owner;
        doc.kind = p.kind;
        doc.description = p.description;
        doc.grantees = p.grantees;
        auto terms = parse_policy(p.terms_text);
        if (!terms.ok()) throw std::runtime_error("confirmed policy does not parse");
        doc.terms = terms.value();
        policies_[p.policy_id] = std::move(doc);
        break;
      }
      case TxType::ProfileBadge: {
        auto p = payload::Badge::decode(tx.payload);
        ProfileBadge badge;
        badge.badge_id = p.badge_id;
        badge.holder = p.holder;
        badge.policy_id = p.policy_id;
        badge.valid = true;
        badge.issued_at = tx.timestamp;
        badges_[p.badge_id] = badge;
        badge_index_[{p.holder, p.policy_id}] = p.badge_id;
        break;
      }
      case TxType::OrganizationRevocation: {
        auto p = payload::Sanction::decode(tx.payload);
        auto it = pseudonyms_.find(p.subject);
        if (it != pseudonyms_.end()) it->second.status = IdentityStatus::Revoked;
        break;
      }
      case TxType::ViolationAddition: {
        auto p = payload::Sanction::decode(tx.payload);
        auto it = pseudonyms_.find(p.subject);
        if (it != pseudonyms_.end()) profiles_[it->second.profile_id].violations.push_back(p.note);
        break;
      }
      case TxType::IdentityExposure:
        break;  // audit event only
      default:
        throw std::runtime_error("activity transaction confirmed on identity network");
    }
  }

  // Advisory domains for the deploy-time vacuity warning. Attribute values
  // are sampled around the literals the policy itself mentions; integers are
  // treated as natural quantities (counts, scores), so samples stay >= 0.
  static AttributeDomain advisory_domain(const RuleNode& terms) {
    struct Collector {
      std::map<std::string, std::set<std::int64_t>> ints;
      std::map<std::string, std::set<std::string>> strings;
      std::set<std::string> bools;

      void walk(const RuleNode& n) {
        if (n.kind == RuleNode::Kind::Combine) {
          for (const auto& c : n.children) walk(c);
          return;
        }
        if (const auto* i = std::get_if<std::int64_t>(&n.literal)) {
          auto& dom = ints[n.attribute];
          for (std::int64_t v : {*i - 1, *i, *i + 1})
            if (v >= 0) dom.insert(v);
          dom.insert(0);
          dom.insert(10000);
        } else if (const auto* s = std::get_if<std::string>(&n.literal)) {
          auto& dom = strings[n.attribute];
          dom.insert(*s);
          dom.insert(*s + "_x");
          dom.insert("");
        } else {
          bools.insert(n.attribute);
        }
      }
    } c;
    c.walk(terms);
    AttributeDomain domains;
    for (const auto& [name, vals] : c.ints) {
      auto& d = domains[name];
      for (auto v : vals) d.push_back(v);
    }
    for (const auto& [name, vals] : c.strings) {
      auto& d = domains[name];
      for (const auto& v : vals) d.push_back(v);
    }
    for (const auto& name : c.bools) domains[name] = {true, false};
    return domains;
  }

  Ledger ledger_;
  SimClock* clock_;
  const SimConfig* config_;
  mutable std::shared_ptr<std::recursive_mutex> mu_ =
      std::make_shared<std::recursive_mutex>();

  std::map<std::string, Registrar> registrars_;
  std::map<Digest, StoredProfile> profiles_;
  std::map<std::string, PseudoIdentity> pseudonyms_;
  std::map<std::string, PolicyDocument> policies_;
  std::map<std::string, ProfileBadge> badges_;
  std::map<std::pair<std::string, std::string>, std::string> badge_index_;
  std::map<std::pair<std::string, VoteAction>, ConsortiumVote> votes_;

  std::function<bool(const OrganizationProfile&)> verify_profile_;
  std::function<void(const std::string&, const PublicKey&)> on_new_pseudonym_;
  std::function<void(const std::string&, AttributeSet&)> attribute_injector_;
  std::function<bool(const std::string&)> policy_open_check_;

  std::uint64_t key_seq_ = 0;
  std::uint64_t policy_seq_ = 0;
  std::uint64_t badge_seq_ = 0;
  std::size_t applied_blocks_ = 0;
};

}  // namespace trade
