#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "trade/client_sdk.hpp"
#include "trade/sim.hpp"

using namespace trade;

namespace {

struct Fixture {
  Simulation sim;
  ClientSession producer{&sim, "Acme"};
  ClientSession consumer{&sim, "Beta"};
  std::string producer_addr;
  std::string consumer_addr;
  std::string policy_id;

  explicit Fixture(SimConfig config = {}) : sim(std::move(config)) {
    sim.add_registrar("R1");
    sim.add_server("S1", "taxii://s1");
    OrganizationProfile acme;
    acme.name = "Acme";
    acme.employees = 1200;
    acme.annual_revenue = 1000;
    acme.hq_location = "EU";
    producer_addr = producer.register_with("R1", acme).value();
    OrganizationProfile beta;
    beta.name = "Beta";
    beta.employees = 300;
    beta.annual_revenue = 1000;
    beta.hq_location = "US";
    consumer_addr = consumer.register_with("R1", beta).value();
    policy_id = producer.deploy_policy(PolicyKind::Sharing, "p", "(employees >= 100)")
                    .value()
                    .policy_id;
  }

  std::string publish(const std::string& text,
                      std::optional<std::string> legal_terms = {}) {
    return producer
        .insert_cti("S1", to_bytes(text), {"malware"}, "d", {{Privilege::Read, {policy_id}}},
                    std::move(legal_terms))
        .value();
  }
};

}  // namespace

TEST_CASE("publish awards karma on top of the initial grant") {
  Fixture f;
  CHECK(f.sim.incentives().karma(f.producer_addr).balance == 10);  // initial grant
  f.publish("one");
  CHECK(f.sim.incentives().karma(f.producer_addr).balance == 20);
  f.publish("two");
  CHECK(f.sim.incentives().karma(f.producer_addr).balance == 30);
}

TEST_CASE("consume spends karma, discounts first") {
  // (balance, discounts, expected balance after a cost-5 spend or reject)
  struct Case {
    std::int64_t balance;
    std::int64_t discounts;
    bool ok;
    std::int64_t balance_after;
    std::int64_t discounts_after;
  };
  // oracle: d = min(discounts, cost); need = cost - d; ok iff balance >= need
  auto oracle = [](std::int64_t balance, std::int64_t discounts) {
    Case c{balance, discounts, false, balance, discounts};
    std::int64_t d = std::min<std::int64_t>(discounts, 5);
    std::int64_t need = 5 - d;
    if (balance >= need) {
      c.ok = true;
      c.balance_after = balance - need;
      c.discounts_after = discounts - d;
    }
    return c;
  };

  for (std::int64_t balance : {0, 1, 3, 5, 10}) {
    for (std::int64_t discounts : {0, 1, 2, 5, 7}) {
      CAPTURE(balance);
      CAPTURE(discounts);
      SimConfig config;
      config.karma_initial_grant = 0;
      Fixture f(config);
      auto uid = f.publish("x");

      // hand-craft the account state through grant/rating txs is awkward;
      // poke the engine through its own transaction path instead
      auto& engine = f.sim.incentives();
      const auto* keys = f.consumer.keys_for(f.consumer_addr);
      if (balance > 0) {
        payload::Karma grant;
        grant.holder = f.consumer_addr;
        grant.reason = payload::Karma::Reason::InitialGrant;
        grant.amount = balance;
        auto tx = Transaction::make(TxType::KarmaTransfer, f.consumer_addr, grant.encode(),
                                    *keys, f.sim.now());
        REQUIRE(f.sim.activity().raw_ledger().submit(tx).ok());
        f.sim.activity().confirm_and_apply();
      }
      if (discounts > 0) {
        // discounts accrue from ratings; emulate via repeated rating txs on
        // distinct records would be heavy, so check the arithmetic against
        // the engine's own apply path
        for (std::int64_t i = 0; i < discounts; ++i) {
          payload::Rating r;
          r.rater = f.consumer_addr;
          r.record_uid = "rec-seed-" + std::to_string(i);
          r.producer = f.producer_addr;
          r.stars = 3;
          auto tx = Transaction::make(TxType::RatingSubmission, f.consumer_addr, r.encode(),
                                      *keys, f.sim.now());
          REQUIRE(f.sim.activity().raw_ledger().submit(tx).ok());
          f.sim.activity().confirm_and_apply();
        }
      }
      REQUIRE(engine.karma(f.consumer_addr).balance == balance);
      REQUIRE(engine.karma(f.consumer_addr).discount_credits == discounts);

      Case expected = oracle(balance, discounts);
      auto spent = engine.spend_on_consume(f.consumer_addr, uid, *keys);
      CHECK(spent.ok() == expected.ok);
      if (!spent.ok()) CHECK(spent.code() == Errc::InsufficientKarma);
      CHECK(engine.karma(f.consumer_addr).balance == expected.balance_after);
      CHECK(engine.karma(f.consumer_addr).discount_credits == expected.discounts_after);
    }
  }
}

TEST_CASE("zero karma aborts the acquisition before any APR") {
  SimConfig config;
  config.karma_initial_grant = 0;
  Fixture f(config);
  auto uid = f.publish("gated");
  auto r = f.consumer.acquire(uid);
  CHECK(r.code() == Errc::InsufficientKarma);
  CHECK(f.sim.activity().ledger().count_confirmed(TxType::AccessToken) == 0);
}

TEST_CASE("ratings: running mean, discount credit, one rating per consumer") {
  Fixture f;
  auto uid = f.publish("rate me");
  REQUIRE(f.consumer.acquire(uid).ok());

  SUBCASE("mean of 4 then 2 is 3.0") {
    auto first = f.consumer.rate(uid, 4);
    REQUIRE(first.ok());
    CHECK(first.value().producer_score_num == 4);
    CHECK(first.value().producer_score_den == 1);
    CHECK(first.value().consumer_discounts == 1);
    CHECK(f.consumer.rate(uid, 2).code() == Errc::AlreadyRated);

    // a second consumer retrieves and rates 2
    ClientSession other(&f.sim, "Gamma");
    OrganizationProfile p;
    p.name = "Gamma";
    p.employees = 500;
    p.annual_revenue = 10;
    p.hq_location = "SE";
    REQUIRE(other.register_with("R1", p).ok());
    REQUIRE(other.acquire(uid).ok());
    auto second = other.rate(uid, 2);
    REQUIRE(second.ok());
    CHECK(second.value().producer_score_num == 6);
    CHECK(second.value().producer_score_den == 2);  // mean 3.0
    CHECK(f.sim.activity().ledger().count_confirmed(TxType::RatingSubmission) == 2);
  }

  SUBCASE("rating without a completed retrieval is rejected") {
    ClientSession lurker(&f.sim, "Lurker");
    OrganizationProfile p;
    p.name = "Lurker";
    p.employees = 500;
    p.annual_revenue = 10;
    p.hq_location = "SE";
    REQUIRE(lurker.register_with("R1", p).ok());
    CHECK(lurker.rate(uid, 5).code() == Errc::NotAConsumer);
  }

  SUBCASE("stars out of range") {
    CHECK(f.consumer.rate(uid, 6).code() == Errc::StarsOutOfRange);
    CHECK(f.consumer.rate(uid, -1).code() == Errc::StarsOutOfRange);
  }
}

TEST_CASE("100 random rating sequences match the brute-force mean oracle") {
  Fixture f;
  // many consumers, one record each iteration would be costly; instead rate
  // many records by many consumers and recompute from the full list
  std::mt19937 rng(404);
  std::vector<std::string> uids;
  for (int i = 0; i < 5; ++i) uids.push_back(f.publish("r" + std::to_string(i)));

  std::vector<ClientSession> raters;
  raters.reserve(10);
  for (int i = 0; i < 10; ++i) {
    raters.emplace_back(&f.sim, "Rater" + std::to_string(i));
    OrganizationProfile p;
    p.name = "Rater" + std::to_string(i);
    p.employees = 500;
    p.annual_revenue = 10;
    p.hq_location = "SE";
    REQUIRE(raters.back().register_with("R1", p).ok());
  }

  std::vector<int> all_stars;  // oracle: every accepted rating in order
  int accepted = 0;
  for (int step = 0; step < 100; ++step) {
    auto& rater = raters[rng() % raters.size()];
    const auto& uid = uids[rng() % uids.size()];
    int stars = static_cast<int>(rng() % 6);
    auto got = rater.acquire(uid);
    if (!got.ok()) continue;  // out of karma eventually: fine, oracle skips too
    auto rated = rater.rate(uid, stars);
    if (rated.ok()) {
      all_stars.push_back(stars);
      ++accepted;
      // engine score equals brute-force mean over every accepted rating
      std::int64_t sum = 0;
      for (int s : all_stars) sum += s;
      auto rep = f.sim.incentives().reputation(f.producer_addr);
      CHECK(rep.rating_sum == sum);
      CHECK(rep.ratings_count == all_stars.size());
    }
  }
  CHECK(accepted > 10);  // the sequence actually exercised the path
}

TEST_CASE("reputation gate at badge issuance") {
  Fixture f;
  auto gate = f.producer.deploy_policy(PolicyKind::Sharing, "rep", "(reputation >= 3)").value();
  auto uid = f.producer
                 .insert_cti("S1", to_bytes("gated"), {"malware"}, "d",
                             {{Privilege::Read, {gate.policy_id}}})
                 .value();

  SUBCASE("fresh pseudonym gets the default score") {
    // default 2.5 -> integral part 2 -> below a >=3 gate
    auto r = f.consumer.acquire(uid);
    CHECK(r.code() == Errc::PolicyNotSatisfied);
    // with a >=2 gate the default passes
    auto gate2 = f.producer.deploy_policy(PolicyKind::Sharing, "rep2", "(reputation >= 2)")
                     .value();
    auto uid2 = f.producer
                    .insert_cti("S1", to_bytes("gated2"), {"malware"}, "d",
                                {{Privilege::Read, {gate2.policy_id}}})
                    .value();
    CHECK(f.consumer.acquire(uid2).ok());
  }

  SUBCASE("high and low ratings move the gate outcome") {
    // consumer retrieves an ungated record from the producer, rates it high;
    // the CONSUMER's reputation is what the gate sees when it asks for a
    // badge, so have the producer rate the consumer's records instead
    auto consumer_policy =
        f.consumer.deploy_policy(PolicyKind::Sharing, "cp", "(employees >= 1)").value();
    auto consumer_record = f.consumer
                               .insert_cti("S1", to_bytes("by consumer"), {"intel"}, "d",
                                           {{Privilege::Read, {consumer_policy.policy_id}}})
                               .value();
    REQUIRE(f.producer.acquire(consumer_record).ok());
    REQUIRE(f.producer.rate(consumer_record, 5).ok());  // consumer rep: 5.0

    CHECK(f.consumer.acquire(uid).ok());  // 5 >= 3
  }
}

TEST_CASE("legal contract tagging and signature flow") {
  Fixture f;
  auto uid = f.publish("tagged", std::string("terms: non-redistribution"));
  auto rec = f.sim.activity().record(uid);
  REQUIRE(rec->legal_contract_id.has_value());
  auto contract = f.sim.incentives().contract(*rec->legal_contract_id);
  REQUIRE(contract.has_value());
  CHECK(contract->terms_text == "terms: non-redistribution");
  CHECK(contract->record_uid == uid);

  SUBCASE("acquire before signing is rejected with no APR") {
    auto r = f.consumer.acquire(uid);
    CHECK(r.code() == Errc::LegalSignatureRequired);
    CHECK(f.sim.activity().ledger().count_confirmed(TxType::AccessToken) == 0);
  }

  SUBCASE("sign then acquire succeeds and the signature is on the chain") {
    REQUIRE(f.consumer.sign_contract(uid).ok());
    CHECK(f.sim.activity().ledger().count_confirmed(TxType::LegalSignature) == 1);
    CHECK(f.consumer.acquire(uid).ok());
  }

  SUBCASE("signing twice is rejected") {
    REQUIRE(f.consumer.sign_contract(uid).ok());
    CHECK(f.consumer.sign_contract(uid).code() == Errc::AlreadySigned);
  }

  SUBCASE("signing an untagged record is rejected") {
    auto plain = f.publish("untagged");
    CHECK(f.consumer.sign_contract(plain).code() == Errc::NoSuchContract);
  }
}

TEST_CASE("karma conservation: balances reconcile with the ledger history") {
  Fixture f;
  std::mt19937 rng(777);
  std::vector<std::string> uids;
  for (int step = 0; step < 20; ++step) {
    switch (rng() % 3) {
      case 0:
        uids.push_back(f.publish("step " + std::to_string(step)));
        break;
      case 1:
        if (!uids.empty()) (void)f.consumer.acquire(uids[rng() % uids.size()]);
        break;
      default:
        if (!uids.empty()) (void)f.consumer.rate(uids[rng() % uids.size()], rng() % 6);
        break;
    }
    if (step % 5 == 0) f.sim.tick();
  }

  // replay the chain: sum of karma deltas per holder == final balance
  std::map<std::string, std::int64_t> replayed;
  std::int64_t granted = 0, awarded = 0, spent = 0;
  for (const auto& block : f.sim.activity().ledger().chain())
    for (const auto& tx : block.confirmed) {
      if (tx.type != TxType::KarmaTransfer) continue;
      auto p = payload::Karma::decode(tx.payload);
      replayed[p.holder] += p.amount;
      switch (p.reason) {
        case payload::Karma::Reason::InitialGrant: granted += p.amount; break;
        case payload::Karma::Reason::PublishReward: awarded += p.amount; break;
        case payload::Karma::Reason::ConsumeSpend: spent += -p.amount; break;
      }
    }
  std::int64_t total_balance = 0;
  for (const auto& [holder, balance] : replayed) {
    CHECK(f.sim.incentives().karma(holder).balance == balance);
    total_balance += balance;
  }
  CHECK(total_balance + spent == granted + awarded);
  CHECK(f.sim.incentives().total_granted() == granted);
  CHECK(f.sim.incentives().total_awarded() == awarded);
  CHECK(f.sim.incentives().total_spent() == spent);
}
