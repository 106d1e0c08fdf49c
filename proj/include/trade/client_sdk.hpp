#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "trade/sim.hpp"

namespace trade {

// Reference to an access permission token handed to a server request.
struct TradeHeader {
  std::string apt_ref;
  std::string requester;
};

// Organization-side facade. One session per real organization: it keeps the
// signing keys of every pseudonym the organization controls, a badge cache,
// and whatever the workflows need to stay replayable. Sessions are
// single-owner; distinct sessions may drive the same simulation.
class ClientSession {
 public:
  ClientSession(Simulation* sim, std::string real_name)
      : sim_(sim), real_name_(std::move(real_name)) {}

  const std::string& real_name() const { return real_name_; }

  // --- identity ------------------------------------------------------------

  Result<std::string> register_with(const std::string& registrar_id,
                                    const OrganizationProfile& profile) {
    auto id = sim_->register_organization(registrar_id, profile);
    if (!id.ok()) return Result<std::string>(id.error());
    registrar_ = registrar_id;
    profile_ = profile;
    adopt(id.value());
    return id.value().address;
  }

  Result<std::vector<std::string>> add_temporaries(std::size_t count) {
    if (registrar_.empty())
      return Result<std::vector<std::string>>::failure(Errc::UnknownOrganization, real_name_);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < count; ++i) {
      auto id = sim_->issue_temporary_identity(registrar_, real_name_);
      if (!id.ok()) return Result<std::vector<std::string>>(id.error());
      adopt(id.value());
      out.push_back(id.value().address);
    }
    return out;
  }

  Result<std::size_t> update_profile(const OrganizationProfile& new_profile) {
    auto r = sim_->identity().on_profile_update(real_name_, new_profile);
    if (r.ok()) profile_ = new_profile;
    return r;
  }

  const OrganizationProfile& profile() const { return profile_; }

  std::vector<std::string> pseudonyms() const {
    std::vector<std::string> out;
    for (const auto& p : pseudonyms_) out.push_back(p.address);
    return out;
  }

  const KeyPair* keys_for(const std::string& addr) const {
    for (const auto& p : pseudonyms_)
      if (p.address == addr) return &p.key_pair;
    return nullptr;
  }

  // Restrict which pseudonyms the acquisition workflows rotate over; the
  // privacy/overhead knob. Unknown addresses are ignored.
  void set_rotation(const std::vector<std::string>& addrs) {
    rotation_.clear();
    for (const auto& a : addrs)
      if (keys_for(a)) rotation_.push_back(a);
    rr_ = 0;
  }

  // --- policies --------------------------------------------------------------

  Result<DeployOutcome> deploy_policy(PolicyKind kind, const std::string& description,
                                      const std::string& policy_text,
                                      const std::set<std::string>& grantees = {}) {
    auto terms = parse_policy(policy_text);
    if (!terms.ok()) return Result<DeployOutcome>(terms.error());
    const auto* owner = current_pseudonym();
    if (!owner) return Result<DeployOutcome>::failure(Errc::UnknownOrganization, real_name_);
    return sim_->identity().deploy_policy(owner->address, kind, description, terms.value(),
                                          grantees, owner->key_pair);
  }

  void set_consumption_policy(const std::string& policy_id) { consumption_policy_ = policy_id; }

  // --- publication -----------------------------------------------------------

  Result<std::string> insert_cti(const std::string& server_id, const Bytes& payload,
                                 const std::set<std::string>& keywords,
                                 const std::string& description,
                                 const std::map<Privilege, std::vector<std::string>>& privileges,
                                 std::optional<std::string> legal_terms = {}) {
    const auto* owner = advance_pseudonym();
    if (!owner) return Result<std::string>::failure(Errc::UnknownOrganization, real_name_);
    CtiServer* server = sim_->server(server_id);
    if (!server)
      return Result<std::string>::failure(Errc::ReferenceError, "no server " + server_id);

    // referenced policies must exist and be usable by this organization
    for (const auto& [priv, policies] : privileges) {
      for (const auto& pid : policies) {
        auto doc = sim_->identity().policy(pid);
        if (!doc) return Result<std::string>::failure(Errc::UnknownPolicy, pid);
        bool usable = doc->owner == owner->address || doc->grantees.count(owner->address) ||
                      doc->grantees.count("*");
        if (!usable) {
          // any pseudonym of this session counts as "us"
          for (const auto& p : pseudonyms_)
            if (doc->owner == p.address || doc->grantees.count(p.address)) usable = true;
        }
        if (!usable) return Result<std::string>::failure(Errc::NotGranted, pid);
      }
    }

    auto inserted = server->insert_cti(owner->address, payload);
    if (!inserted.ok()) return Result<std::string>(inserted.error());

    DataRecordDraft draft;
    draft.record_uid = inserted.value().record_uid;
    draft.privilege_policy_map = privileges;
    draft.content_digest = inserted.value().digest;
    draft.description = description;
    for (const auto& k : keywords) draft.keywords.insert(ActivityNetwork::lowercase(k));
    draft.server_address = server->address();
    draft.legal_terms = std::move(legal_terms);

    auto uid = sim_->activity().publish_data(owner->address, draft, owner->key_pair);
    if (!uid.ok()) return uid;
    auto award = sim_->incentives().award_on_publish(owner->address, uid.value(),
                                                     owner->key_pair);
    if (!award.ok()) return Result<std::string>(award.error());
    owned_records_[uid.value()] = owner->address;
    return uid;
  }

  // --- acquisition (the three-phase authorization) ----------------------------

  Result<Bytes> acquire(const std::string& record_uid, Privilege privilege = Privilege::Read) {
    const auto* consumer = advance_pseudonym();
    if (!consumer) return Result<Bytes>::failure(Errc::UnknownOrganization, real_name_);

    auto rec = sim_->activity().record(record_uid);
    if (!rec) return Result<Bytes>::failure(Errc::UnknownRecord, record_uid);

    // consumption policy first: nothing is spent when the consumer's own
    // rules reject the source
    if (consumption_policy_) {
      auto verdict = consumption_allows(*rec);
      if (!verdict.ok()) return Result<Bytes>(verdict.error());
    }

    if (rec->legal_contract_id &&
        !sim_->incentives().has_signed(*rec->legal_contract_id, consumer->address))
      return Result<Bytes>::failure(Errc::LegalSignatureRequired, *rec->legal_contract_id);

    auto required = rec->privilege_policy_map.find(privilege);
    if (required == rec->privilege_policy_map.end())
      return Result<Bytes>::failure(Errc::UnknownPrivilege, privilege_name(privilege));

    // phase 1: one badge per required policy, cache-aware
    auto badges = collect_badges(*consumer, required->second);
    if (!badges.ok()) return Result<Bytes>(badges.error());

    // karma is spent exactly once per acquisition, before any APR
    auto spent = sim_->incentives().spend_on_consume(consumer->address, record_uid,
                                                     consumer->key_pair);
    if (!spent.ok()) return Result<Bytes>(spent.error());

    // phase 2: access permission request, with one retry after evicting a
    // stale badge cache
    auto apt = sim_->activity().access_permission_request(
        consumer->address, record_uid, privilege, badges.value(),
        consumer->key_pair.public_key, consumer->key_pair);
    if (!apt.ok() && apt.code() == Errc::InvalidBadge) {
      for (const auto& pid : required->second) badge_cache_.erase({consumer->address, pid});
      badges = collect_badges(*consumer, required->second);
      if (!badges.ok()) return Result<Bytes>(badges.error());
      apt = sim_->activity().access_permission_request(
          consumer->address, record_uid, privilege, badges.value(),
          consumer->key_pair.public_key, consumer->key_pair);
    }
    if (!apt.ok()) return Result<Bytes>(apt.error());

    // phase 3: signed retrieval from the server named by the record
    CtiServer* server = sim_->server_at(rec->server_address);
    if (!server)
      return Result<Bytes>::failure(Errc::UnknownRecord,
                                    "no server at " + rec->server_address);
    RetrievalRequest req;
    req.operation = privilege;
    req.record_uid = record_uid;
    req.apt_ref = apt.value();
    req.tick = sim_->now();
    req.requester_signature = consumer->key_pair.sign(
        CtiServer::retrieval_signing_bytes(privilege, record_uid, apt.value(), req.tick));
    auto payload = server->authorize_and_retrieve(req);
    if (!payload.ok()) return payload;

    if (sha256(payload.value()) != rec->content_digest)
      return Result<Bytes>::failure(Errc::DataAuthenticationFailed, record_uid);
    retrieved_by_[record_uid] = consumer->address;
    return payload;
  }

  // --- services ----------------------------------------------------------------

  Result<std::vector<TransparencyEvent>> transparency(const std::string& record_uid) {
    auto owner = owned_records_.find(record_uid);
    std::string caller =
        owner != owned_records_.end()
            ? owner->second
            : (current_pseudonym() ? current_pseudonym()->address : std::string{});
    return sim_->activity().transparency_report(caller, record_uid);
  }

  void subscribe(const std::set<std::string>& keywords) {
    const auto* self = current_pseudonym();
    if (!self) return;
    for (const auto& k : keywords) interest_keywords_.insert(ActivityNetwork::lowercase(k));
    sim_->activity().subscribe(self->address, keywords);
  }

  std::vector<Notification> drain_notifications() {
    std::vector<Notification> out;
    for (const auto& p : pseudonyms_) {
      auto batch = sim_->activity().drain_notifications(p.address);
      out.insert(out.end(), batch.begin(), batch.end());
    }
    return out;
  }

  Result<std::string> navigate(const std::string& record_uid) const {
    auto rec = sim_->activity().record(record_uid);
    if (!rec) return Result<std::string>::failure(Errc::UnknownRecord, record_uid);
    return rec->server_address;
  }

  std::vector<std::string> search(const std::set<std::string>& keywords) const {
    const auto* self = pseudonyms_.empty() ? nullptr : &pseudonyms_.front();
    return sim_->activity().search(self ? self->address : "", keywords);
  }

  // --- incentives ----------------------------------------------------------------

  Result<RatingOutcome> rate(const std::string& record_uid, int stars) {
    auto it = retrieved_by_.find(record_uid);
    const NewIdentity* rater = nullptr;
    if (it != retrieved_by_.end()) {
      for (const auto& p : pseudonyms_)
        if (p.address == it->second) rater = &p;
    }
    if (!rater) rater = current_pseudonym();
    if (!rater) return Result<RatingOutcome>::failure(Errc::UnknownOrganization, real_name_);
    return sim_->incentives().rate_contribution(rater->address, record_uid, stars,
                                                rater->key_pair);
  }

  // Signs with the pseudonym the next acquire will use, so sign-then-acquire
  // binds the same identity.
  Result<Tick> sign_contract(const std::string& record_uid) {
    auto rec = sim_->activity().record(record_uid);
    if (!rec) return Result<Tick>::failure(Errc::UnknownRecord, record_uid);
    if (!rec->legal_contract_id)
      return Result<Tick>::failure(Errc::NoSuchContract, record_uid + " is untagged");
    const auto* signer = current_pseudonym();
    if (!signer) return Result<Tick>::failure(Errc::UnknownOrganization, real_name_);
    return sim_->incentives().sign_legal_contract(signer->address, *rec->legal_contract_id,
                                                  signer->key_pair);
  }

  std::int64_t karma_total() const {
    std::int64_t sum = 0;
    for (const auto& p : pseudonyms_) sum += sim_->incentives().karma(p.address).balance;
    return sum;
  }

  std::size_t badge_cache_size() const { return badge_cache_.size(); }

 private:
  void adopt(const NewIdentity& id) {
    pseudonyms_.push_back(id);
    rotation_.push_back(id.address);
  }

  const NewIdentity* find(const std::string& addr) const {
    for (const auto& p : pseudonyms_)
      if (p.address == addr) return &p;
    return nullptr;
  }

  // Round-robin pseudonym selection keeps workflows deterministic while
  // spreading activity over the organization's identities.
  const NewIdentity* current_pseudonym() const {
    if (rotation_.empty()) return nullptr;
    return find(rotation_[rr_ % rotation_.size()]);
  }

  const NewIdentity* advance_pseudonym() {
    if (rotation_.empty()) return nullptr;
    const auto* p = find(rotation_[rr_ % rotation_.size()]);
    ++rr_;
    return p;
  }

  Result<std::vector<std::string>> collect_badges(const NewIdentity& consumer,
                                                  const std::vector<std::string>& policies) {
    std::vector<std::string> refs;
    for (const auto& pid : policies) {
      auto cached = badge_cache_.find({consumer.address, pid});
      if (cached != badge_cache_.end()) {
        refs.push_back(cached->second);
        continue;
      }
      auto issued = sim_->identity().request_profile_badge(consumer.address, pid,
                                                           consumer.key_pair);
      if (!issued.ok()) return Result<std::vector<std::string>>(issued.error());
      badge_cache_[{consumer.address, pid}] = issued.value().badge_ref;
      refs.push_back(issued.value().badge_ref);
    }
    return refs;
  }

  // The consumer's own consumption policy, evaluated against the record's
  // metadata and the producer pseudonym's public attributes.
  Status consumption_allows(const DataRecord& rec) const {
    auto doc = sim_->identity().policy(*consumption_policy_);
    if (!doc)
      return Status::failure(Errc::ConsumptionPolicyRejected,
                             "consumption policy " + *consumption_policy_ + " missing");
    AttributeSet attrs;
    attrs["description"] = rec.description;
    attrs["keywords"] = join(rec.keywords);
    attrs["record_owner"] = rec.owner;
    auto producer = sim_->identity().pseudonym(rec.owner);
    attrs["producer_tags"] = producer ? join(producer->identity_tags) : std::string{};
    attrs["producer_contribution"] =
        producer ? static_cast<std::int64_t>(producer->cti_contribution) : 0;
    auto verdict = evaluate(doc->terms, attrs);
    if (!verdict.ok())
      return Status::failure(Errc::ConsumptionPolicyRejected, verdict.error().to_string());
    if (!verdict.value())
      return Status::failure(Errc::ConsumptionPolicyRejected, *consumption_policy_);
    return ok_status();
  }

  static std::string join(const std::set<std::string>& values) {
    std::string out;
    for (const auto& v : values) {
      if (!out.empty()) out += ',';
      out += v;
    }
    return out;
  }

  Simulation* sim_;
  std::string real_name_;
  std::string registrar_;
  OrganizationProfile profile_;
  std::vector<NewIdentity> pseudonyms_;
  std::vector<std::string> rotation_;
  std::size_t rr_ = 0;
  std::map<std::pair<std::string, std::string>, std::string> badge_cache_;
  std::set<std::string> interest_keywords_;
  std::optional<std::string> consumption_policy_;
  std::map<std::string, std::string> owned_records_;   // record -> publishing pseudonym
  std::map<std::string, std::string> retrieved_by_;    // record -> retrieving pseudonym
};

}  // namespace trade
