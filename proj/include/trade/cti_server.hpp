#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "trade/activity_network.hpp"
#include "trade/config.hpp"
#include "trade/crypto.hpp"

namespace trade {

struct CtiAsset {
  std::string record_uid;
  Bytes payload;
  Digest stored_digest;  // digest(payload) at insertion time
  std::string owner;
};

struct RetrievalRequest {
  Privilege operation = Privilege::Read;
  std::string record_uid;
  std::string apt_ref;
  Tick tick = 0;
  Signature requester_signature;  // over (operation, record_uid, apt_ref, tick)
};

struct InsertOutcome {
  std::string record_uid;
  Digest digest;
};

// The CTI store behind one server address. Holds opaque payloads, checks
// retrieval requests against on-chain access tokens and logs every hand-off
// back to the activity chain. It keeps no ACLs of its own: the ledger is the
// only authorization source.
class CtiServer {
 public:
  CtiServer(std::string server_id, std::string address, KeyPair keys, ActivityNetwork* activity,
            SimClock* clock, const SimConfig* config)
      : id_(std::move(server_id)),
        address_(std::move(address)),
        keys_(std::move(keys)),
        activity_(activity),
        clock_(clock),
        config_(config) {}

  CtiServer(const CtiServer&) = delete;
  CtiServer& operator=(const CtiServer&) = delete;

  void use_shared_mutex(std::shared_ptr<std::recursive_mutex> m) { mu_ = std::move(m); }

  const std::string& id() const { return id_; }
  const std::string& address() const { return address_; }
  const PublicKey& public_key() const { return keys_.public_key; }

  static Bytes retrieval_signing_bytes(Privilege operation, const std::string& record_uid,
                                       const std::string& apt_ref, Tick tick) {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(operation));
    w.str(record_uid);
    w.str(apt_ref);
    w.u64(tick);
    return w.take();
  }

  Result<InsertOutcome> insert_cti(const std::string& owner, const Bytes& payload) {
    std::scoped_lock lock(*mu_);
    if (payload.size() < config_->min_payload_bytes)
      return Result<InsertOutcome>::failure(Errc::InsertionFailed, "payload too small");
    if (payload.size() > config_->max_payload_bytes)
      return Result<InsertOutcome>::failure(Errc::InsertionFailed, "payload too large");
    Digest digest = sha256(payload);
    std::string uid =
        "rec-" + sha256("asset:" + id_ + ":" + owner + ":" + std::to_string(seq_++) + ":" +
                        digest.hex())
                     .prefix_hex(8);
    assets_[uid] = CtiAsset{uid, payload, digest, owner};
    return InsertOutcome{uid, digest};
  }

  // The four retrieval checks run in a fixed order, so the error code for a
  // given request is deterministic:
  //   (a) timestamp window, then token lookup
  //   (b) requester signature against the token's key
  //   (c) privilege and record binding, then expiry
  //   (d) payload lookup, retrieval log append, hand-off
  Result<Bytes> authorize_and_retrieve(const RetrievalRequest& req) {
    std::scoped_lock lock(*mu_);
    Tick now = clock_->now;
    Tick skew = req.tick > now ? req.tick - now : now - req.tick;
    if (skew > config_->stale_window)
      return Result<Bytes>::failure(Errc::StaleTimestamp,
                                    "request tick " + std::to_string(req.tick) + " vs now " +
                                        std::to_string(now));
    auto apt = activity_->get_apt(req.apt_ref);
    if (!apt.ok()) return Result<Bytes>::failure(Errc::UnknownAPT, req.apt_ref);

    Bytes msg = retrieval_signing_bytes(req.operation, req.record_uid, req.apt_ref, req.tick);
    if (!verify_signature(apt.value().requester_public_key, msg, req.requester_signature))
      return Result<Bytes>::failure(Errc::AuthenticationFailed, req.apt_ref);

    if (apt.value().privilege != req.operation || apt.value().record_uid != req.record_uid)
      return Result<Bytes>::failure(Errc::PrivilegeMismatch, req.apt_ref);
    if (now > apt.value().expiration)
      return Result<Bytes>::failure(Errc::ExpiredToken,
                                    "expired at " + std::to_string(apt.value().expiration));

    auto asset = assets_.find(req.record_uid);
    if (asset == assets_.end())
      return Result<Bytes>::failure(Errc::UnknownRecord, req.record_uid);

    auto logged = activity_->log_retrieval(id_, req.record_uid, req.apt_ref,
                                           apt.value().requester, req.operation, now, keys_);
    if (!logged.ok()) return Result<Bytes>(logged.error());
    return asset->second.payload;
  }

  Result<bool> authenticate_data(const Bytes& payload, const std::string& record_uid) const {
    std::scoped_lock lock(*mu_);
    auto rec = activity_->record(record_uid);
    if (!rec) return Result<bool>::failure(Errc::UnknownRecord, record_uid);
    return sha256(payload) == rec->content_digest;
  }

  std::optional<CtiAsset> asset(const std::string& record_uid) const {
    std::scoped_lock lock(*mu_);
    auto it = assets_.find(record_uid);
    if (it == assets_.end()) return std::nullopt;
    return it->second;
  }

  // Storage-level overwrite: the stored digest and the on-chain record stay
  // as they were, which is exactly what a tampered store looks like.
  bool replace_payload(const std::string& record_uid, Bytes payload) {
    std::scoped_lock lock(*mu_);
    auto it = assets_.find(record_uid);
    if (it == assets_.end()) return false;
    it->second.payload = std::move(payload);
    return true;
  }

 private:
  std::string id_;
  std::string address_;
  KeyPair keys_;
  ActivityNetwork* activity_;
  SimClock* clock_;
  const SimConfig* config_;
  mutable std::shared_ptr<std::recursive_mutex> mu_ =
      std::make_shared<std::recursive_mutex>();

  std::map<std::string, CtiAsset> assets_;
  std::uint64_t seq_ = 0;
};

}  // namespace trade
