#pragma once

#include <fstream>
#include <map>
#include <memory>
#include <string>

#include "trade/activity_network.hpp"
#include "trade/config.hpp"
#include "trade/cti_server.hpp"
#include "trade/identity_network.hpp"

namespace trade {

// One in-process deployment: both ledgers, the registrar consortium, any
// number of CTI servers, a logical clock and the cross-network wiring. All
// cross-component calls are synchronous; determinism comes from the logical
// clock and seed-derived keys.
class Simulation {
 public:
  explicit Simulation(SimConfig config = {})
      : config_(std::move(config)),
        identity_(&clock_, &config_),
        activity_(&clock_, &config_) {
    identity_.use_shared_mutex(mu_);
    activity_.use_shared_mutex(mu_);

    identity_.set_on_new_pseudonym([this](const std::string& addr, const PublicKey& key) {
      activity_.add_member(addr, key, MemberRole::Client);
    });
    identity_.set_attribute_injector([this](const std::string& addr, AttributeSet& attrs) {
      activity_.incentives().inject_attributes(addr, attrs);
    });
    identity_.set_policy_open_check(
        [this](const std::string& policy_id) { return activity_.policy_in_use(policy_id); });

    ActivityNetwork::IdentityFacade facade;
    facade.badge = [this](const std::string& ref) { return identity_.badge(ref); };
    facade.pseudonym_active =
        [this](const std::string& addr) { return identity_.pseudonym_active(addr); };
    facade.policy_exists =
        [this](const std::string& id) { return identity_.policy(id).has_value(); };
    facade.on_publish = [this](const std::string& owner) { identity_.bump_contribution(owner); };
    activity_.set_identity_facade(std::move(facade));
  }

  SimConfig& config() { return config_; }
  const SimConfig& config() const { return config_; }
  SimClock& clock() { return clock_; }
  Tick now() const { return clock_.now; }

  IdentityNetwork& identity() { return identity_; }
  ActivityNetwork& activity() { return activity_; }
  IncentiveEngine& incentives() { return activity_.incentives(); }

  void add_registrar(const std::string& id) {
    identity_.add_registrar(id, derive_keys("registrar-key:" + id));
  }

  CtiServer& add_server(const std::string& id, const std::string& address) {
    auto keys = derive_keys("server-key:" + id);
    activity_.add_member(id, keys.public_key, MemberRole::Server);
    auto server = std::make_unique<CtiServer>(id, address, keys, &activity_, &clock_, &config_);
    server->use_shared_mutex(mu_);
    auto* raw = server.get();
    servers_[id] = std::move(server);
    servers_by_address_[address] = raw;
    return *raw;
  }

  CtiServer* server(const std::string& id) {
    auto it = servers_.find(id);
    return it == servers_.end() ? nullptr : it->second.get();
  }

  CtiServer* server_at(const std::string& address) {
    auto it = servers_by_address_.find(address);
    return it == servers_by_address_.end() ? nullptr : it->second;
  }

  // Registration and temporary-identity issuance both end with the new
  // pseudonym funded by the configured initial karma grant.
  Result<NewIdentity> register_organization(const std::string& registrar_id,
                                            const OrganizationProfile& profile) {
    auto id = identity_.register_organization(registrar_id, profile);
    if (!id.ok()) return id;
    auto grant = incentives().grant_initial(id.value().address, id.value().key_pair);
    if (!grant.ok()) return Result<NewIdentity>(grant.error());
    return id;
  }

  Result<NewIdentity> issue_temporary_identity(const std::string& registrar_id,
                                               const std::string& real_name) {
    auto id = identity_.issue_temporary_identity(registrar_id, real_name);
    if (!id.ok()) return id;
    auto grant = incentives().grant_initial(id.value().address, id.value().key_pair);
    if (!grant.ok()) return Result<NewIdentity>(grant.error());
    return id;
  }

  // One logical tick: advance the clock, then run one confirmation round on
  // each network for anything still pending.
  void tick(Tick n = 1) {
    clock_.advance(n);
    identity_.confirm_and_apply();
    activity_.confirm_and_apply();
  }

  void dump_identity(std::ostream& os) const { identity_.ledger().dump(os); }
  void dump_activity(std::ostream& os) const { activity_.ledger().dump(os); }

  bool write_dumps(const std::string& identity_path, const std::string& activity_path,
                   const std::string& mappings_path) const {
    std::ofstream identity_out(identity_path);
    std::ofstream activity_out(activity_path);
    std::ofstream mappings_out(mappings_path);
    if (!identity_out || !activity_out || !mappings_out) return false;
    identity_.ledger().dump(identity_out);
    activity_.ledger().dump(activity_out);
    identity_.export_mappings(mappings_out);
    return true;
  }

 private:
  KeyPair derive_keys(const std::string& label) const {
    ByteWriter w;
    w.str(label);
    w.u64(config_.seed);
    return KeyPair::from_seed(sha256(w.data()));
  }

  SimConfig config_;
  SimClock clock_;
  std::shared_ptr<std::recursive_mutex> mu_ = std::make_shared<std::recursive_mutex>();
  IdentityNetwork identity_;
  ActivityNetwork activity_;
  std::map<std::string, std::unique_ptr<CtiServer>> servers_;
  std::map<std::string, CtiServer*> servers_by_address_;
};

}  // namespace trade
