#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>

#include "trade/config.hpp"
#include "trade/ledger.hpp"
#include "trade/policy.hpp"

namespace trade {

struct KarmaAccount {
  std::string holder;
  std::int64_t balance = 0;  // spends are rejected, never overdrawn
  std::int64_t discount_credits = 0;
};

// Exact rational score: sum/count of received ratings, each in [0,5].
struct ReputationProfile {
  std::string holder;
  std::int64_t rating_sum = 0;
  std::uint64_t ratings_count = 0;

  std::pair<std::int64_t, std::int64_t> score(const SimConfig& config) const {
    if (ratings_count == 0) return {config.reputation_default_num, config.reputation_default_den};
    return {rating_sum, static_cast<std::int64_t>(ratings_count)};
  }
};

struct LegalContract {
  std::string contract_id;
  std::string record_uid;
  std::string terms_text;
  std::map<std::string, Tick> signatures;  // signer -> tick, at most one each
};

namespace payload {

struct Karma {
  enum class Reason : std::uint8_t { InitialGrant = 0, PublishReward = 1, ConsumeSpend = 2 };
  std::string holder;
  Reason reason = Reason::InitialGrant;
  std::int64_t amount = 0;  // applied to the balance, signed
  std::int64_t discount_used = 0;
  std::string record_uid;  // context, empty for grants
  // Per-holder account nonce: two otherwise identical transfers in one tick
  // must not collide on tx id.
  std::uint64_t seq = 0;

  Bytes encode() const {
    ByteWriter w;
    w.str(holder);
    w.u8(static_cast<std::uint8_t>(reason));
    w.i64(amount);
    w.i64(discount_used);
    w.str(record_uid);
    w.u64(seq);
    return w.take();
  }

  static Karma decode(const Bytes& b) {
    ByteReader r(b);
    Karma p;
    p.holder = r.str();
    p.reason = static_cast<Reason>(r.u8());
    p.amount = r.i64();
    p.discount_used = r.i64();
    p.record_uid = r.str();
    p.seq = r.u64();
    return p;
  }
};

struct Rating {
  std::string rater;
  std::string record_uid;
  std::string producer;
  std::uint8_t stars = 0;

  Bytes encode() const {
    ByteWriter w;
    w.str(rater);
    w.str(record_uid);
    w.str(producer);
    w.u8(stars);
    return w.take();
  }

  static Rating decode(const Bytes& b) {
    ByteReader r(b);
    Rating p;
    p.rater = r.str();
    p.record_uid = r.str();
    p.producer = r.str();
    p.stars = r.u8();
    return p;
  }
};

struct Legal {
  std::string contract_id;
  std::string signer;

  Bytes encode() const {
    ByteWriter w;
    w.str(contract_id);
    w.str(signer);
    return w.take();
  }

  static Legal decode(const Bytes& b) {
    ByteReader r(b);
    Legal p;
    p.contract_id = r.str();
    p.signer = r.str();
    return p;
  }
};

}  // namespace payload

struct RatingOutcome {
  std::int64_t producer_score_num = 0;
  std::int64_t producer_score_den = 1;
  std::int64_t consumer_discounts = 0;
};

// Karma accounting, quality ratings, reputation and legal-contract tagging.
// All state changes flow through activity-ledger transactions: the engine
// builds and submits them via the callbacks below, and the activity network
// feeds confirmed transactions back through the apply_* methods. Replaying
// the chain therefore reconstructs every balance and score exactly.
class IncentiveEngine {
 public:
  using SubmitFn =
      std::function<Result<Digest>(TxType, const std::string&, Bytes, const KeyPair&)>;
  using RetrievalEvidenceFn = std::function<bool(const std::string&, const std::string&)>;
  using RecordOwnerFn = std::function<std::optional<std::string>(const std::string&)>;

  IncentiveEngine(const SimConfig* config, SubmitFn submit, RetrievalEvidenceFn evidence,
                  RecordOwnerFn record_owner)
      : config_(config),
        submit_(std::move(submit)),
        retrieval_evidence_(std::move(evidence)),
        record_owner_(std::move(record_owner)) {}

  // --- operations (each submits one confirmed transaction) -----------------

  Result<std::int64_t> grant_initial(const std::string& holder, const KeyPair& keys) {
    if (config_->karma_initial_grant == 0) return karma(holder).balance;
    payload::Karma p;
    p.holder = holder;
    p.reason = payload::Karma::Reason::InitialGrant;
    p.amount = config_->karma_initial_grant;
    p.seq = karma_seq(holder);
    auto r = submit_(TxType::KarmaTransfer, holder, p.encode(), keys);
    if (!r.ok()) return Result<std::int64_t>(r.error());
    return karma(holder).balance;
  }

  Result<std::int64_t> award_on_publish(const std::string& owner, const std::string& record_uid,
                                        const KeyPair& keys) {
    payload::Karma p;
    p.holder = owner;
    p.reason = payload::Karma::Reason::PublishReward;
    p.amount = config_->karma_publish_reward;
    p.record_uid = record_uid;
    p.seq = karma_seq(owner);
    auto r = submit_(TxType::KarmaTransfer, owner, p.encode(), keys);
    if (!r.ok()) return Result<std::int64_t>(r.error());
    return karma(owner).balance;
  }

  // Discount credits are consumed before the balance. The whole spend is
  // atomic: an account that cannot cover the cost is left untouched.
  Result<std::int64_t> spend_on_consume(const std::string& consumer,
                                        const std::string& record_uid, const KeyPair& keys) {
    KarmaAccount account = karma(consumer);
    std::int64_t cost = config_->karma_consume_cost;
    std::int64_t discount_used = std::min(account.discount_credits, cost);
    std::int64_t need = cost - discount_used;
    if (account.balance < need)
      return Result<std::int64_t>::failure(
          Errc::InsufficientKarma, consumer + " has " + std::to_string(account.balance) +
                                       ", needs " + std::to_string(need));
    payload::Karma p;
    p.holder = consumer;
    p.reason = payload::Karma::Reason::ConsumeSpend;
    p.amount = -need;
    p.discount_used = discount_used;
    p.record_uid = record_uid;
    p.seq = karma_seq(consumer);
    auto r = submit_(TxType::KarmaTransfer, consumer, p.encode(), keys);
    if (!r.ok()) return Result<std::int64_t>(r.error());
    return karma(consumer).balance;
  }

  Result<RatingOutcome> rate_contribution(const std::string& consumer,
                                          const std::string& record_uid, int stars,
                                          const KeyPair& keys) {
    if (stars < 0 || stars > 5)
      return Result<RatingOutcome>::failure(Errc::StarsOutOfRange, std::to_string(stars));
    if (!retrieval_evidence_(consumer, record_uid))
      return Result<RatingOutcome>::failure(Errc::NotAConsumer,
                                            consumer + " never retrieved " + record_uid);
    if (rated_.count({consumer, record_uid}))
      return Result<RatingOutcome>::failure(Errc::AlreadyRated, record_uid);
    auto producer = record_owner_(record_uid);
    if (!producer)
      return Result<RatingOutcome>::failure(Errc::UnknownRecord, record_uid);

    payload::Rating p;
    p.rater = consumer;
    p.record_uid = record_uid;
    p.producer = *producer;
    p.stars = static_cast<std::uint8_t>(stars);
    auto r = submit_(TxType::RatingSubmission, consumer, p.encode(), keys);
    if (!r.ok()) return Result<RatingOutcome>(r.error());

    RatingOutcome out;
    auto score = reputation(*producer).score(*config_);
    out.producer_score_num = score.first;
    out.producer_score_den = score.second;
    out.consumer_discounts = karma(consumer).discount_credits;
    return out;
  }

  Result<Tick> sign_legal_contract(const std::string& consumer, const std::string& contract_id,
                                   const KeyPair& keys) {
    auto it = contracts_.find(contract_id);
    if (it == contracts_.end())
      return Result<Tick>::failure(Errc::NoSuchContract, contract_id);
    if (it->second.signatures.count(consumer))
      return Result<Tick>::failure(Errc::AlreadySigned, contract_id);
    payload::Legal p;
    p.contract_id = contract_id;
    p.signer = consumer;
    auto r = submit_(TxType::LegalSignature, consumer, p.encode(), keys);
    if (!r.ok()) return Result<Tick>(r.error());
    return contracts_.at(contract_id).signatures.at(consumer);
  }

  // --- confirmed-transaction effects ----------------------------------------

  void apply_karma(const payload::Karma& p) {
    auto& account = accounts_[p.holder];
    account.holder = p.holder;
    account.balance += p.amount;
    account.discount_credits -= p.discount_used;
    karma_seq_[p.holder] = std::max(karma_seq_[p.holder], p.seq + 1);
    switch (p.reason) {
      case payload::Karma::Reason::InitialGrant: total_granted_ += p.amount; break;
      case payload::Karma::Reason::PublishReward: total_awarded_ += p.amount; break;
      case payload::Karma::Reason::ConsumeSpend: total_spent_ += -p.amount; break;
    }
  }

  void apply_rating(const payload::Rating& p) {
    auto& rep = reputations_[p.producer];
    rep.holder = p.producer;
    rep.rating_sum += p.stars;
    rep.ratings_count += 1;
    auto& account = accounts_[p.rater];
    account.holder = p.rater;
    account.discount_credits += config_->karma_rating_discount;
    rated_.insert({p.rater, p.record_uid});
  }

  void apply_legal(const payload::Legal& p, Tick tick) {
    auto it = contracts_.find(p.contract_id);
    if (it != contracts_.end()) it->second.signatures.emplace(p.signer, tick);
  }

  // Called when a tagged record lands on the chain.
  void register_contract(const LegalContract& contract) {
    contracts_.emplace(contract.contract_id, contract);
  }

  // --- queries ---------------------------------------------------------------

  KarmaAccount karma(const std::string& holder) const {
    auto it = accounts_.find(holder);
    if (it == accounts_.end()) return KarmaAccount{holder, 0, 0};
    return it->second;
  }

  ReputationProfile reputation(const std::string& holder) const {
    auto it = reputations_.find(holder);
    if (it == reputations_.end()) return ReputationProfile{holder, 0, 0};
    return it->second;
  }

  std::optional<LegalContract> contract(const std::string& contract_id) const {
    auto it = contracts_.find(contract_id);
    if (it == contracts_.end()) return std::nullopt;
    return it->second;
  }

  bool has_signed(const std::string& contract_id, const std::string& signer) const {
    auto it = contracts_.find(contract_id);
    return it != contracts_.end() && it->second.signatures.count(signer) != 0;
  }

  bool has_rated(const std::string& consumer, const std::string& record_uid) const {
    return rated_.count({consumer, record_uid}) != 0;
  }

  // Reputation-gated policies compare against an integer `reputation`
  // attribute: the integral part of the exact score. For the >= gates the
  // paper's threshold rules use, floor(score) >= t exactly when score >= t.
  void inject_attributes(const std::string& holder, AttributeSet& attrs) const {
    auto score = reputation(holder).score(*config_);
    attrs["reputation"] = score.first / score.second;
  }

  std::uint64_t karma_seq(const std::string& holder) const {
    auto it = karma_seq_.find(holder);
    return it == karma_seq_.end() ? 0 : it->second;
  }

  std::int64_t total_granted() const { return total_granted_; }
  std::int64_t total_awarded() const { return total_awarded_; }
  std::int64_t total_spent() const { return total_spent_; }

  const std::map<std::string, KarmaAccount>& accounts() const { return accounts_; }

 private:
  const SimConfig* config_;
  SubmitFn submit_;
  RetrievalEvidenceFn retrieval_evidence_;
  RecordOwnerFn record_owner_;

  std::map<std::string, KarmaAccount> accounts_;
  std::map<std::string, ReputationProfile> reputations_;
  std::map<std::string, LegalContract> contracts_;
  std::set<std::pair<std::string, std::string>> rated_;
  std::map<std::string, std::uint64_t> karma_seq_;
  std::int64_t total_granted_ = 0;
  std::int64_t total_awarded_ = 0;
  std::int64_t total_spent_ = 0;
};

}  // namespace trade
