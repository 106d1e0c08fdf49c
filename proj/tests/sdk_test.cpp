#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "trade/client_sdk.hpp"
#include "trade/sim.hpp"

using namespace trade;

namespace {

OrganizationProfile org(const std::string& name, std::int64_t employees = 500,
                        const std::string& hq = "EU") {
  OrganizationProfile p;
  p.name = name;
  p.employees = employees;
  p.annual_revenue = 1000;
  p.hq_location = hq;
  return p;
}

struct Fixture {
  Simulation sim;
  ClientSession producer{&sim, "Acme"};
  ClientSession consumer{&sim, "Beta"};
  std::string policy_id;

  explicit Fixture(SimConfig config = {}) : sim(std::move(config)) {
    sim.add_registrar("R1");
    sim.add_server("S1", "taxii://s1");
    REQUIRE(producer.register_with("R1", org("Acme", 1200)).ok());
    REQUIRE(consumer.register_with("R1", org("Beta", 300, "US")).ok());
    policy_id = producer.deploy_policy(PolicyKind::Sharing, "p", "(employees >= 100)")
                    .value()
                    .policy_id;
  }

  std::string publish(const std::string& text) {
    return producer
        .insert_cti("S1", to_bytes(text), {"malware"}, "d", {{Privilege::Read, {policy_id}}})
        .value();
  }
};

}  // namespace

TEST_CASE("register: session gains a pseudonym, failure leaves it unchanged") {
  Simulation sim;
  sim.add_registrar("R1");
  ClientSession s(&sim, "Acme");
  CHECK(s.pseudonyms().empty());

  REQUIRE(s.register_with("R1", org("Acme")).ok());
  CHECK(s.pseudonyms().size() == 1);

  auto bad = org("Acme");
  bad.hq_location = "";  // fails profile verification
  CHECK(s.register_with("R1", bad).code() == Errc::VerificationFailed);
  CHECK(s.pseudonyms().size() == 1);

  // a second successful registration adds a second pseudonym
  REQUIRE(s.register_with("R1", org("Acme")).ok());
  CHECK(s.pseudonyms().size() == 2);
}

TEST_CASE("insert_cti publishes a record whose digest matches the uploaded bytes") {
  Fixture f;
  auto uid = f.publish("exact bytes");
  auto rec = f.sim.activity().record(uid);
  REQUIRE(rec.has_value());
  CHECK(rec->content_digest == sha256(to_bytes("exact bytes")));
  CHECK(f.sim.server("S1")->asset(uid)->stored_digest == rec->content_digest);

  SUBCASE("record is searchable") {
    auto hits = f.consumer.search({"malware"});
    REQUIRE(hits.size() == 1);
    CHECK(hits[0] == uid);
  }

  SUBCASE("navigate returns the address passed at insert") {
    CHECK(f.consumer.navigate(uid).value() == "taxii://s1");
    CHECK(f.consumer.navigate("rec-nope").code() == Errc::UnknownRecord);
  }

  SUBCASE("server rejection leaves no record on the ledger") {
    auto before = f.sim.activity().ledger().count_confirmed(TxType::CyberThreatAssociation);
    auto r = f.producer.insert_cti("S1", Bytes{}, {"malware"}, "d",
                                   {{Privilege::Read, {f.policy_id}}});
    CHECK(r.code() == Errc::InsertionFailed);
    CHECK(f.sim.activity().ledger().count_confirmed(TxType::CyberThreatAssociation) == before);
  }

  SUBCASE("referencing someone else's closed policy is rejected") {
    auto r = f.consumer.insert_cti("S1", to_bytes("x"), {"malware"}, "d",
                                   {{Privilege::Read, {f.policy_id}}});
    CHECK(r.code() == Errc::NotGranted);
  }
}

TEST_CASE("acquire runs all three phases and verifies the payload") {
  Fixture f;
  auto uid = f.publish("the goods");
  auto got = f.consumer.acquire(uid);
  REQUIRE(got.ok());
  CHECK(got.value() == to_bytes("the goods"));

  // phase evidence on the ledgers
  CHECK(f.sim.identity().ledger().count_confirmed(TxType::ProfileBadge) == 1);
  CHECK(f.sim.activity().ledger().count_confirmed(TxType::AccessToken) == 1);
  CHECK(f.sim.activity().ledger().count_confirmed(TxType::AccessData) == 1);

  SUBCASE("badge is cached: repeat acquire adds a token but no badge") {
    REQUIRE(f.consumer.acquire(uid).ok());
    CHECK(f.sim.identity().ledger().count_confirmed(TxType::ProfileBadge) == 1);
    CHECK(f.sim.activity().ledger().count_confirmed(TxType::AccessToken) == 2);
  }

  SUBCASE("profile too small fails phase 1") {
    ClientSession tiny(&f.sim, "Tiny");
    REQUIRE(tiny.register_with("R1", org("Tiny", 50)).ok());
    CHECK(tiny.acquire(uid).code() == Errc::PolicyNotSatisfied);
  }

  SUBCASE("unknown record") {
    CHECK(f.consumer.acquire("rec-nope").code() == Errc::UnknownRecord);
  }
}

TEST_CASE("stale badge cache is evicted and re-requested exactly once") {
  SimConfig config;
  config.karma_initial_grant = 100;
  Fixture f(config);
  auto uid = f.publish("cached");
  REQUIRE(f.consumer.acquire(uid).ok());
  CHECK(f.consumer.badge_cache_size() == 1);

  // invalidate the cached badge via a profile update that still satisfies
  auto updated = org("Beta", 400, "US");
  REQUIRE(f.consumer.update_profile(updated).value() == 1);

  auto got = f.consumer.acquire(uid);
  REQUIRE(got.ok());
  // one fresh badge was issued on top of the original
  CHECK(f.sim.identity().ledger().count_confirmed(TxType::ProfileBadge) == 2);

  // now make the profile fail the policy: the retry path must surface the
  // real policy failure, not loop
  REQUIRE(f.consumer.update_profile(org("Beta", 10, "US")).ok());
  CHECK(f.consumer.acquire(uid).code() == Errc::PolicyNotSatisfied);
}

TEST_CASE("consumption policy gates the acquisition before anything is spent") {
  Fixture f;
  auto uid = f.publish("filtered");

  auto cp = f.consumer
                .deploy_policy(PolicyKind::Consumption, "needs contribution",
                               "(producer_contribution >= 2)")
                .value();
  f.consumer.set_consumption_policy(cp.policy_id);

  auto badge_count_before = f.sim.identity().ledger().count_confirmed(TxType::ProfileBadge);
  auto r = f.consumer.acquire(uid);
  CHECK(r.code() == Errc::ConsumptionPolicyRejected);
  // nothing was spent or issued
  CHECK(f.sim.identity().ledger().count_confirmed(TxType::ProfileBadge) == badge_count_before);
  CHECK(f.sim.activity().ledger().count_confirmed(TxType::AccessToken) == 0);
  CHECK(f.sim.incentives().karma(f.consumer.pseudonyms()[0]).balance == 10);

  // a second publication lifts the producer's contribution to 2
  f.publish("second");
  auto uid3 = f.publish("third");
  CHECK(f.consumer.acquire(uid3).ok());

  SUBCASE("keyword-based consumption policy") {
    auto kw = f.consumer
                  .deploy_policy(PolicyKind::Consumption, "kw",
                                 "(keywords contains \"malware\")")
                  .value();
    f.consumer.set_consumption_policy(kw.policy_id);
    CHECK(f.consumer.acquire(uid).ok());
    auto strict = f.consumer
                      .deploy_policy(PolicyKind::Consumption, "kw2",
                                     "(keywords contains \"iot\")")
                      .value();
    f.consumer.set_consumption_policy(strict.policy_id);
    CHECK(f.consumer.acquire(uid).code() == Errc::ConsumptionPolicyRejected);
  }
}

TEST_CASE("tampered server storage is detected at acquisition") {
  Fixture f;
  auto uid = f.publish("pristine content");
  // producer (or anyone with storage access) rewrites the stored bytes
  REQUIRE(f.sim.server("S1")->replace_payload(uid, to_bytes("evil content")));
  auto r = f.consumer.acquire(uid);
  CHECK(r.code() == Errc::DataAuthenticationFailed);
  CHECK(!f.sim.server("S1")->authenticate_data(to_bytes("evil content"), uid).value());
}

TEST_CASE("transparency after one peer acquire shows a token and a retrieval") {
  Fixture f;
  auto uid = f.publish("watched");
  REQUIRE(f.consumer.acquire(uid).ok());
  auto events = f.producer.transparency(uid);
  REQUIRE(events.ok());
  CHECK(events.value().size() == 2);
  CHECK(events.value()[0].kind == TransparencyEvent::Kind::TokenIssued);
  CHECK(events.value()[1].kind == TransparencyEvent::Kind::Retrieval);

  // consumer asking for the producer's report is rejected
  CHECK(f.consumer.transparency(uid).code() == Errc::NotOwner);
}

TEST_CASE("no subscriptions means drain returns empty") {
  Fixture f;
  f.publish("quiet");
  CHECK(f.consumer.drain_notifications().empty());
}

TEST_CASE("badge accounting: k policies x N pseudonyms yields exactly k*N badges") {
  for (std::size_t n : {1u, 2u, 4u}) {
    for (std::size_t k : {1u, 3u}) {
      CAPTURE(n);
      CAPTURE(k);
      SimConfig config;
      config.karma_initial_grant = 1000;  // keep karma out of the way
      Fixture f(config);

      // one record requiring k distinct policies for Read
      std::vector<std::string> policies{f.policy_id};
      for (std::size_t i = 1; i < k; ++i)
        policies.push_back(f.producer
                               .deploy_policy(PolicyKind::Sharing, "p" + std::to_string(i),
                                              "(employees >= " + std::to_string(i) + ")")
                               .value()
                               .policy_id);
      auto uid = f.producer
                     .insert_cti("S1", to_bytes("kn"), {"malware"}, "d",
                                 {{Privilege::Read, policies}})
                     .value();

      // N temporary pseudonyms; acquisition rotates over exactly those
      auto temps = f.consumer.add_temporaries(n).value();
      f.consumer.set_rotation(temps);

      for (std::size_t i = 0; i < n; ++i) REQUIRE(f.consumer.acquire(uid).ok());
      CHECK(f.sim.identity().ledger().count_confirmed(TxType::ProfileBadge) == k * n);
      CHECK(f.sim.activity().ledger().count_confirmed(TxType::AccessToken) == n);

      // repeating every acquire doubles the tokens, badge count unchanged
      for (std::size_t i = 0; i < n; ++i) REQUIRE(f.consumer.acquire(uid).ok());
      CHECK(f.sim.identity().ledger().count_confirmed(TxType::ProfileBadge) == k * n);
      CHECK(f.sim.activity().ledger().count_confirmed(TxType::AccessToken) == 2 * n);
    }
  }
}

TEST_CASE("phase ordering holds on the ledgers") {
  Fixture f;
  auto uid = f.publish("ordered");
  f.sim.tick();
  REQUIRE(f.consumer.acquire(uid).ok());

  // every APT's badges exist at or before the APT's tick; every retrieval
  // follows its token
  auto badges = f.sim.identity()
                    .ledger()
                    .query(f.consumer.pseudonyms()[0],
                           [](const Transaction& tx) { return tx.type == TxType::ProfileBadge; })
                    .value();
  auto tokens = f.sim.activity()
                    .ledger()
                    .query(f.consumer.pseudonyms()[0],
                           [](const Transaction& tx) { return tx.type == TxType::AccessToken; })
                    .value();
  auto retrievals =
      f.sim.activity()
          .ledger()
          .query(f.consumer.pseudonyms()[0],
                 [](const Transaction& tx) { return tx.type == TxType::AccessData; })
          .value();
  REQUIRE(badges.size() == 1);
  REQUIRE(tokens.size() == 1);
  REQUIRE(retrievals.size() == 1);
  CHECK(badges[0].timestamp <= tokens[0].timestamp);
  CHECK(tokens[0].timestamp <= retrievals[0].timestamp);
}

TEST_CASE("expired token surfaces through acquire") {
  SimConfig config;
  config.apt_ttl = 1;
  Fixture f(config);
  auto uid = f.publish("short-lived");
  // acquire performs APR and retrieval in the same tick, so this passes
  REQUIRE(f.consumer.acquire(uid).ok());

  // a manual phase-3 with an old token fails after the clock moves
  const auto addr = f.consumer.pseudonyms()[0];
  const auto* keys = f.consumer.keys_for(addr);
  auto badge = f.sim.identity().request_profile_badge(addr, f.policy_id, *keys).value();
  auto apt = f.sim.activity()
                 .access_permission_request(addr, uid, Privilege::Read, {badge.badge_ref},
                                            keys->public_key, *keys)
                 .value();
  f.sim.tick(2);
  RetrievalRequest req;
  req.operation = Privilege::Read;
  req.record_uid = uid;
  req.apt_ref = apt;
  req.tick = f.sim.now();
  req.requester_signature =
      keys->sign(CtiServer::retrieval_signing_bytes(Privilege::Read, uid, apt, req.tick));
  CHECK(f.sim.server("S1")->authorize_and_retrieve(req).code() == Errc::ExpiredToken);
}
