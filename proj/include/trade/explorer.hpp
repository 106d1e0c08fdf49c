#pragma once

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "trade/activity_network.hpp"
#include "trade/identity_network.hpp"
#include "trade/ledger.hpp"

namespace trade {

// Executable encodings of the four protocol workflows (registration, policy
// creation, CTI insertion, access authorization) over role-labelled state
// machines, message channels and the real Ledger type, plus a breadth-first
// explorer that enumerates every interleaving and checks termination and
// deadlock freedom.

enum class Workflow : std::uint8_t {
  Registration = 0,
  PolicyCreation = 1,
  CtiInsertion = 2,
  AccessAuthorization = 3,
};

inline const char* workflow_name(Workflow w) {
  switch (w) {
    case Workflow::Registration: return "registration";
    case Workflow::PolicyCreation: return "policy-creation";
    case Workflow::CtiInsertion: return "cti-insertion";
    case Workflow::AccessAuthorization: return "access-authorization";
  }
  return "?";
}

inline std::optional<Workflow> workflow_from_name(std::string_view name) {
  for (int i = 0; i <= 3; ++i) {
    auto w = static_cast<Workflow>(i);
    if (name == workflow_name(w)) return w;
  }
  return std::nullopt;
}

// Injected result of an off-chain function (profile verification, CTI
// insertion, badge validation, access verification). Both explores the two
// branches as separate transitions.
enum class Outcome : std::uint8_t { Success, Failure, Both };

struct ExplorerConfig {
  Workflow workflow = Workflow::Registration;
  std::size_t orgs = 1;
  std::size_t registrars = 1;
  std::size_t servers = 1;
  std::size_t consumers = 1;
  std::size_t pool = 1;  // work items fed to the workflow
  Outcome verify_profile = Outcome::Success;
  Outcome insert_cti = Outcome::Success;
  Outcome validate_badge = Outcome::Success;
  Outcome verify_access = Outcome::Success;
  std::uint64_t max_states = 1000000;
};

struct ExplorationReport {
  std::string workflow;
  std::size_t depth = 0;            // states on the longest shortest path
  std::uint64_t states_found = 0;   // states generated, duplicates included
  std::uint64_t distinct_states = 0;
  std::uint64_t errors = 0;         // deadlocks + invariant violations
  std::vector<std::string> error_notes;

  std::string summary_line() const {
    return workflow + "|" + std::to_string(depth) + "|" + std::to_string(states_found) + "|" +
           std::to_string(distinct_states) + "|" + std::to_string(errors);
  }
};

namespace wf {

enum class OrgLabel : std::uint8_t {
  Waiting,
  Register,
  ReceiveBlockchainIdentity,
  CreatePolicy,
  Insert,
  AssociatePolicy,
  Final,
};

enum class RegLabel : std::uint8_t {
  Waiting,
  Verification,  // reserved label; the verification step consumes a message
                 // and moves straight on, matching the transition structure
  BlockchainIdentityCreation,
  SaveMapping,
};

enum class ConsLabel : std::uint8_t {
  Waiting,
  RequestMetaData,
  CreateBadge,
  RequestToken,
  AccessServer,
  ValidateAccess,
  Final,
};

enum class MsgType : std::uint8_t { Verification, No, Ok, Identity, Insertion, Access };

struct Message {
  std::string src;
  std::string dst;
  MsgType type = MsgType::Verification;
  std::vector<std::string> data;

  auto key() const { return std::tie(type, src, dst, data); }
  bool operator<(const Message& o) const { return key() < o.key(); }
  bool operator==(const Message& o) const { return key() == o.key(); }
};

struct State {
  bool setup_done = false;
  std::vector<OrgLabel> org;
  std::vector<std::string> org_buffer;
  std::vector<RegLabel> reg;
  std::vector<std::string> reg_buffer;  // "org_index:item"
  std::vector<ConsLabel> cons;
  std::vector<std::string> cons_cti;
  std::vector<Message> channel;  // kept sorted (multiset semantics)
  std::deque<std::string> work_pool;
  std::vector<std::pair<std::string, std::string>> mappings;  // sorted, off-chain
  Ledger identity{NetworkTag::Identity};
  Ledger activity{NetworkTag::Activity};

  // history variables for the safety checks
  std::vector<std::uint32_t> org_verified_ok;
  std::vector<std::uint32_t> org_verify_failed;
  std::vector<std::uint32_t> org_identity_received;
  std::vector<std::uint32_t> org_failure_received;
  std::vector<std::uint8_t> cons_badge_ok;
  std::vector<std::uint8_t> cons_granted;
  std::vector<std::uint8_t> cons_denied;

  Bytes encode() const {
    ByteWriter w;
    w.boolean(setup_done);
    w.u32(static_cast<std::uint32_t>(org.size()));
    for (std::size_t i = 0; i < org.size(); ++i) {
      w.u8(static_cast<std::uint8_t>(org[i]));
      w.str(org_buffer[i]);
    }
    w.u32(static_cast<std::uint32_t>(reg.size()));
    for (std::size_t i = 0; i < reg.size(); ++i) {
      w.u8(static_cast<std::uint8_t>(reg[i]));
      w.str(reg_buffer[i]);
    }
    w.u32(static_cast<std::uint32_t>(cons.size()));
    for (std::size_t i = 0; i < cons.size(); ++i) {
      w.u8(static_cast<std::uint8_t>(cons[i]));
      w.str(cons_cti[i]);
    }
    w.u32(static_cast<std::uint32_t>(channel.size()));
    for (const auto& m : channel) {
      w.u8(static_cast<std::uint8_t>(m.type));
      w.str(m.src);
      w.str(m.dst);
      w.u32(static_cast<std::uint32_t>(m.data.size()));
      for (const auto& d : m.data) w.str(d);
    }
    w.u32(static_cast<std::uint32_t>(work_pool.size()));
    for (const auto& item : work_pool) w.str(item);
    w.u32(static_cast<std::uint32_t>(mappings.size()));
    for (const auto& [a, b] : mappings) {
      w.str(a);
      w.str(b);
    }
    identity.encode(w);
    activity.encode(w);
    for (auto v : org_verified_ok) w.u32(v);
    for (auto v : org_verify_failed) w.u32(v);
    for (auto v : org_identity_received) w.u32(v);
    for (auto v : org_failure_received) w.u32(v);
    for (auto v : cons_badge_ok) w.u8(v);
    for (auto v : cons_granted) w.u8(v);
    for (auto v : cons_denied) w.u8(v);
    return w.take();
  }

  Digest digest() const { return sha256(encode()); }

  void send(Message m) {
    channel.push_back(std::move(m));
    std::sort(channel.begin(), channel.end());
  }

  void consume(std::size_t index) { channel.erase(channel.begin() + index); }
};

}  // namespace wf

// One workflow instantiated at a fixed configuration; exposes the initial
// state, the enabled-transition relation and the invariants the explorer
// checks in every visited state.
class WorkflowMachine {
 public:
  explicit WorkflowMachine(ExplorerConfig config) : config_(config) {
    for (std::size_t i = 0; i < config_.registrars; ++i)
      registrar_keys_.push_back(KeyPair::from_seed(sha256("wf-reg-" + std::to_string(i))));
    for (std::size_t i = 0; i < config_.orgs; ++i)
      org_keys_.push_back(KeyPair::from_seed(sha256("wf-org-" + std::to_string(i))));
    for (std::size_t i = 0; i < config_.consumers; ++i)
      cons_keys_.push_back(KeyPair::from_seed(sha256("wf-cons-" + std::to_string(i))));
    seed_producer_keys_ = KeyPair::from_seed(sha256("wf-seed-producer"));
  }

  const ExplorerConfig& config() const { return config_; }

  static std::string org_name(std::size_t i) { return "org" + std::to_string(i); }
  static std::string reg_name(std::size_t i) { return "reg" + std::to_string(i); }
  static std::string srv_name(std::size_t i) { return "srv" + std::to_string(i); }
  static std::string cons_name(std::size_t i) { return "cons" + std::to_string(i); }

  wf::State initial() const {
    wf::State s;
    bool uses_orgs = config_.workflow != Workflow::AccessAuthorization;
    std::size_t orgs = uses_orgs ? config_.orgs : 0;
    s.org.assign(orgs, wf::OrgLabel::Waiting);
    s.org_buffer.assign(orgs, "");
    s.org_verified_ok.assign(orgs, 0);
    s.org_verify_failed.assign(orgs, 0);
    s.org_identity_received.assign(orgs, 0);
    s.org_failure_received.assign(orgs, 0);

    std::size_t regs = config_.workflow == Workflow::Registration ? config_.registrars : 0;
    s.reg.assign(regs, wf::RegLabel::Waiting);
    s.reg_buffer.assign(regs, "");

    std::size_t cons = config_.workflow == Workflow::AccessAuthorization ? config_.consumers : 0;
    s.cons.assign(cons, wf::ConsLabel::Waiting);
    s.cons_cti.assign(cons, "");
    s.cons_badge_ok.assign(cons, 0);
    s.cons_granted.assign(cons, 0);
    s.cons_denied.assign(cons, 0);

    // ledger memberships
    switch (config_.workflow) {
      case Workflow::Registration:
        for (std::size_t i = 0; i < config_.registrars; ++i)
          s.identity.add_member(reg_name(i), registrar_keys_[i].public_key,
                                MemberRole::Registrar);
        break;
      case Workflow::PolicyCreation:
        for (std::size_t i = 0; i < config_.orgs; ++i)
          s.identity.add_member(org_name(i), org_keys_[i].public_key, MemberRole::Client);
        break;
      case Workflow::CtiInsertion:
        for (std::size_t i = 0; i < config_.orgs; ++i)
          s.activity.add_member(org_name(i), org_keys_[i].public_key, MemberRole::Client);
        break;
      case Workflow::AccessAuthorization: {
        for (std::size_t i = 0; i < config_.consumers; ++i) {
          s.identity.add_member(cons_name(i), cons_keys_[i].public_key, MemberRole::Client);
          s.activity.add_member(cons_name(i), cons_keys_[i].public_key, MemberRole::Client);
        }
        // the record under access already exists on the activity chain
        s.activity.add_member("seed-producer", seed_producer_keys_.public_key,
                              MemberRole::Client);
        payload::CyberThreat seed;
        seed.record_uid = "wf-rec-0";
        seed.owner = "seed-producer";
        seed.privilege_policies[0] = {"wf-pol-0"};
        seed.content_digest = sha256(std::string("wf-seed"));
        seed.description = "seeded record";
        seed.keywords = {"wf"};
        seed.server_address = "wf://server";
        auto tx = Transaction::make(TxType::CyberThreatAssociation, "seed-producer",
                                    seed.encode(), seed_producer_keys_, 0);
        if (!s.activity.submit(tx).ok())
          throw std::runtime_error("seeding the access workflow failed");
        s.activity.confirm_receipt();
        break;
      }
    }
    return s;
  }

  // Labels only; the spec-level enabled-transition query. Termination shows
  // up once every organization/consumer role reached its final label.
  std::vector<std::string> enabled_transitions(const wf::State& s) const {
    std::vector<std::string> labels;
    std::set<std::string> seen;
    for (const auto& [label, next] : successors(s))
      if (seen.insert(label).second) labels.push_back(label);
    if (is_terminal(s)) labels.push_back("Termination");
    return labels;
  }

  bool is_terminal(const wf::State& s) const {
    for (auto l : s.org)
      if (l != wf::OrgLabel::Final) return false;
    for (auto l : s.cons)
      if (l != wf::ConsLabel::Final) return false;
    return true;
  }

  std::optional<std::string> safety_violation(const wf::State& s) const {
    // a role may never hold a label foreign to its workflow
    for (auto l : s.org) {
      bool ok = false;
      switch (config_.workflow) {
        case Workflow::Registration:
          ok = l == wf::OrgLabel::Waiting || l == wf::OrgLabel::Register ||
               l == wf::OrgLabel::ReceiveBlockchainIdentity || l == wf::OrgLabel::Final;
          break;
        case Workflow::PolicyCreation:
          ok = l == wf::OrgLabel::Waiting || l == wf::OrgLabel::CreatePolicy ||
               l == wf::OrgLabel::Final;
          break;
        case Workflow::CtiInsertion:
          ok = l == wf::OrgLabel::Waiting || l == wf::OrgLabel::Insert ||
               l == wf::OrgLabel::AssociatePolicy || l == wf::OrgLabel::Final;
          break;
        case Workflow::AccessAuthorization:
          ok = false;
          break;
      }
      if (!ok) return "organization label out of range";
    }
    // an organization only ever holds an identity it was verified for
    for (std::size_t i = 0; i < s.org_identity_received.size(); ++i) {
      if (s.org_identity_received[i] > s.org_verified_ok[i])
        return "identity received without successful verification";
      if (s.org_failure_received[i] > s.org_verify_failed[i])
        return "failure notice without failed verification";
    }
    // access is granted only after a valid badge path
    for (std::size_t i = 0; i < s.cons_granted.size(); ++i)
      if (s.cons_granted[i] && !s.cons_badge_ok[i])
        return "access granted without badge validation";
    // pool/chain exclusivity on both ledgers
    for (const Ledger* ledger : {&s.identity, &s.activity})
      for (const auto& tx : ledger->pool())
        if (ledger->chain_contains(tx.tx_id)) return "transaction both pending and confirmed";
    return std::nullopt;
  }

  // All successor states with their transition labels, in a fixed order.
  std::vector<std::pair<std::string, wf::State>> successors(const wf::State& s) const {
    std::vector<std::pair<std::string, wf::State>> out;
    if (!s.setup_done) {
      wf::State next = s;
      for (std::size_t i = 0; i < config_.pool; ++i)
        next.work_pool.push_back("item-" + std::to_string(i));
      next.setup_done = true;
      out.emplace_back("Setup", std::move(next));
      return out;
    }
    switch (config_.workflow) {
      case Workflow::Registration: registration_successors(s, out); break;
      case Workflow::PolicyCreation: policy_successors(s, out); break;
      case Workflow::CtiInsertion: insertion_successors(s, out); break;
      case Workflow::AccessAuthorization: access_successors(s, out); break;
    }
    return out;
  }

 private:
  std::vector<bool> branches(Outcome o) const {
    switch (o) {
      case Outcome::Success: return {true};
      case Outcome::Failure: return {false};
      case Outcome::Both: return {true, false};
    }
    return {true};
  }

  static std::size_t org_index(const std::string& name) {
    return static_cast<std::size_t>(std::stoul(name.substr(3)));
  }

  void submit_or_die(Ledger& ledger, const Transaction& tx) const {
    auto r = ledger.submit(tx);
    if (!r.ok())
      throw std::runtime_error(std::string("workflow submission rejected: ") +
                               r.error().to_string());
  }

  // --- registration ---------------------------------------------------------

  void registration_successors(const wf::State& s,
                               std::vector<std::pair<std::string, wf::State>>& out) const {
    for (std::size_t o = 0; o < s.org.size(); ++o) {
      if (s.org[o] == wf::OrgLabel::Waiting) {
        wf::State next = s;
        if (next.work_pool.empty()) {
          next.org[o] = wf::OrgLabel::Final;
        } else {
          next.org_buffer[o] = next.work_pool.front();
          next.work_pool.pop_front();
          next.org[o] = wf::OrgLabel::Register;
        }
        out.emplace_back("Preparation", std::move(next));
      }
      if (s.org[o] == wf::OrgLabel::Register) {
        for (std::size_t r = 0; r < s.reg.size(); ++r) {
          if (s.reg[r] != wf::RegLabel::Waiting) continue;
          wf::State next = s;
          next.send(wf::Message{org_name(o), reg_name(r), wf::MsgType::Verification,
                                {org_name(o), s.org_buffer[o]}});
          next.org[o] = wf::OrgLabel::ReceiveBlockchainIdentity;
          out.emplace_back("Register", std::move(next));
        }
      }
      // VerificationFailed / ReceiveBlockchainIdentity (message receipt)
      for (std::size_t m = 0; m < s.channel.size(); ++m) {
        const auto& msg = s.channel[m];
        if (msg.dst != org_name(o)) continue;
        if (msg.type == wf::MsgType::No &&
            s.org[o] == wf::OrgLabel::ReceiveBlockchainIdentity) {
          wf::State next = s;
          next.consume(m);
          next.org[o] = wf::OrgLabel::Final;
          next.org_failure_received[o] += 1;
          out.emplace_back("VerificationFailed", std::move(next));
        }
        if (msg.type == wf::MsgType::Identity &&
            s.org[o] == wf::OrgLabel::ReceiveBlockchainIdentity) {
          wf::State next = s;
          next.consume(m);
          next.org_identity_received[o] += 1;
          next.org[o] =
              next.work_pool.empty() ? wf::OrgLabel::Final : wf::OrgLabel::Waiting;
          out.emplace_back("ReceiveBlockchainIdentity", std::move(next));
        }
      }
    }

    for (std::size_t r = 0; r < s.reg.size(); ++r) {
      if (s.reg[r] == wf::RegLabel::Waiting) {
        for (std::size_t m = 0; m < s.channel.size(); ++m) {
          const auto& msg = s.channel[m];
          if (msg.dst != reg_name(r) || msg.type != wf::MsgType::Verification) continue;
          for (bool verified : branches(config_.verify_profile)) {
            wf::State next = s;
            next.consume(m);
            std::size_t o = org_index(msg.data[0]);
            if (verified) {
              next.reg_buffer[r] = msg.data[0] + ":" + msg.data[1];
              next.reg[r] = wf::RegLabel::BlockchainIdentityCreation;
              next.org_verified_ok[o] += 1;
            } else {
              next.send(wf::Message{reg_name(r), msg.data[0], wf::MsgType::No, {}});
              next.org_verify_failed[o] += 1;
            }
            out.emplace_back("Verification", std::move(next));
          }
        }
      }
      if (s.reg[r] == wf::RegLabel::BlockchainIdentityCreation) {
        wf::State next = s;
        auto sep = s.reg_buffer[r].find(':');
        std::string item = s.reg_buffer[r].substr(sep + 1);

        payload::OriginalIdentity original;
        original.profile_id = sha256("wf-profile:" + item);
        original.version = 1;
        original.attrs["item"] = item;
        submit_or_die(next.identity,
                      Transaction::make(TxType::OriginalIdentity, reg_name(r),
                                        original.encode(), registrar_keys_[r], 0));

        payload::BlockchainIdentity pseudo;
        auto pseudo_keys = KeyPair::from_seed(sha256("wf-pseudo:" + item));
        pseudo.address = address_of(pseudo_keys.public_key);
        pseudo.public_key = pseudo_keys.public_key;
        pseudo.issuer = reg_name(r);
        pseudo.profile_id = original.profile_id;
        submit_or_die(next.identity,
                      Transaction::make(TxType::BlockchainIdentity, reg_name(r), pseudo.encode(),
                                        registrar_keys_[r], 0));
        next.reg[r] = wf::RegLabel::SaveMapping;
        out.emplace_back("BlockchainIdentityCreation", std::move(next));
      }
      if (s.reg[r] == wf::RegLabel::SaveMapping) {
        wf::State next = s;
        auto sep = s.reg_buffer[r].find(':');
        std::string org = s.reg_buffer[r].substr(0, sep);
        std::string item = s.reg_buffer[r].substr(sep + 1);
        next.mappings.emplace_back(item, "wf-address:" + item);
        std::sort(next.mappings.begin(), next.mappings.end());
        next.send(wf::Message{reg_name(r), org, wf::MsgType::Identity, {"wf-address:" + item}});
        next.reg[r] = wf::RegLabel::Waiting;
        next.reg_buffer[r].clear();
        out.emplace_back("SaveMapping", std::move(next));
      }
    }

    if (!s.identity.pool().empty()) {
      wf::State next = s;
      next.identity.confirm_receipt();
      out.emplace_back("ConfirmReceipt", std::move(next));
    }
  }

  // --- policy creation --------------------------------------------------------

  void policy_successors(const wf::State& s,
                         std::vector<std::pair<std::string, wf::State>>& out) const {
    for (std::size_t o = 0; o < s.org.size(); ++o) {
      if (s.org[o] == wf::OrgLabel::Waiting) {
        wf::State next = s;
        if (next.work_pool.empty()) {
          next.org[o] = wf::OrgLabel::Final;
        } else {
          next.org_buffer[o] = next.work_pool.front();
          next.work_pool.pop_front();
          next.org[o] = wf::OrgLabel::CreatePolicy;
        }
        out.emplace_back("Preparation", std::move(next));
      }
      if (s.org[o] == wf::OrgLabel::CreatePolicy) {
        wf::State next = s;
        payload::Policy policy;
        policy.action = payload::Policy::Action::Create;
        policy.policy_id = "wf-pol-" + s.org_buffer[o];
        policy.owner = org_name(o);
        policy.kind = PolicyKind::Sharing;
        policy.terms_text = "(employees >= 1)";
        submit_or_die(next.identity,
                      Transaction::make(TxType::PolicyCreation, org_name(o), policy.encode(),
                                        org_keys_[o], 0));
        next.org[o] = wf::OrgLabel::Waiting;
        next.org_buffer[o].clear();
        out.emplace_back("CreatePolicy", std::move(next));
      }
    }
    if (!s.identity.pool().empty()) {
      wf::State next = s;
      next.identity.confirm_receipt();
      out.emplace_back("ConfirmReceipt", std::move(next));
    }
  }

  // --- cti insertion ------------------------------------------------------------

  void insertion_successors(const wf::State& s,
                            std::vector<std::pair<std::string, wf::State>>& out) const {
    for (std::size_t o = 0; o < s.org.size(); ++o) {
      if (s.org[o] == wf::OrgLabel::Waiting) {
        wf::State next = s;
        if (next.work_pool.empty()) {
          next.org[o] = wf::OrgLabel::Final;
        } else {
          next.org_buffer[o] = next.work_pool.front();
          next.work_pool.pop_front();
          next.org[o] = wf::OrgLabel::Insert;
        }
        out.emplace_back("Preparation", std::move(next));
      }
      if (s.org[o] == wf::OrgLabel::Insert) {
        for (std::size_t srv = 0; srv < config_.servers; ++srv) {
          wf::State next = s;
          next.send(wf::Message{org_name(o), srv_name(srv), wf::MsgType::Insertion,
                                {org_name(o), s.org_buffer[o]}});
          next.org[o] = wf::OrgLabel::AssociatePolicy;
          out.emplace_back("InsertCyberInformation", std::move(next));
        }
      }
      for (std::size_t m = 0; m < s.channel.size(); ++m) {
        const auto& msg = s.channel[m];
        if (msg.dst != org_name(o) || s.org[o] != wf::OrgLabel::AssociatePolicy) continue;
        if (msg.type == wf::MsgType::No) {
          wf::State next = s;
          next.consume(m);
          next.org[o] = wf::OrgLabel::Final;
          out.emplace_back("InsertionFailed", std::move(next));
        }
        if (msg.type == wf::MsgType::Ok) {
          wf::State next = s;
          next.consume(m);
          payload::CyberThreat record;
          record.record_uid = "wf-rec-" + s.org_buffer[o];
          record.owner = org_name(o);
          record.privilege_policies[0] = {"wf-pol-0"};
          record.content_digest = sha256("wf-cti:" + s.org_buffer[o]);
          record.description = "inserted";
          record.keywords = {"wf"};
          record.server_address = "wf://server";
          submit_or_die(next.activity,
                        Transaction::make(TxType::CyberThreatAssociation, org_name(o),
                                          record.encode(), org_keys_[o], 0));
          next.org[o] = wf::OrgLabel::Waiting;
          next.org_buffer[o].clear();
          out.emplace_back("PolicyAssociation", std::move(next));
        }
      }
    }

    // servers: always waiting, react to insertion requests
    for (std::size_t srv = 0; srv < config_.servers; ++srv) {
      for (std::size_t m = 0; m < s.channel.size(); ++m) {
        const auto& msg = s.channel[m];
        if (msg.dst != srv_name(srv) || msg.type != wf::MsgType::Insertion) continue;
        for (bool inserted : branches(config_.insert_cti)) {
          wf::State next = s;
          next.consume(m);
          next.send(wf::Message{srv_name(srv), msg.data[0],
                                inserted ? wf::MsgType::Ok : wf::MsgType::No, {}});
          out.emplace_back("Insertion", std::move(next));
        }
      }
    }

    if (!s.activity.pool().empty()) {
      wf::State next = s;
      next.activity.confirm_receipt();
      out.emplace_back("ConfirmReceipt", std::move(next));
    }
  }

  // --- access authorization --------------------------------------------------------

  void access_successors(const wf::State& s,
                         std::vector<std::pair<std::string, wf::State>>& out) const {
    for (std::size_t c = 0; c < s.cons.size(); ++c) {
      if (s.cons[c] == wf::ConsLabel::Waiting) {
        wf::State next = s;
        if (next.work_pool.empty()) {
          next.cons[c] = wf::ConsLabel::Final;
        } else {
          next.work_pool.pop_front();
          next.cons[c] = wf::ConsLabel::RequestMetaData;
        }
        out.emplace_back("Preparation", std::move(next));
      }
      if (s.cons[c] == wf::ConsLabel::RequestMetaData) {
        // a confirmed cyber-threat record must exist on the activity chain
        std::string found;
        for (const auto& block : s.activity.chain())
          for (const auto& tx : block.confirmed)
            if (tx.type == TxType::CyberThreatAssociation && found.empty())
              found = payload::CyberThreat::decode(tx.payload).record_uid;
        if (!found.empty()) {
          wf::State next = s;
          next.cons_cti[c] = found;
          next.cons[c] = wf::ConsLabel::CreateBadge;
          out.emplace_back("RequestMetaData", std::move(next));
        }
      }
      if (s.cons[c] == wf::ConsLabel::CreateBadge) {
        wf::State next = s;
        payload::Badge badge;
        badge.badge_id = "wf-bdg-" + cons_name(c);
        badge.holder = cons_name(c);
        badge.policy_id = "wf-pol-0";
        submit_or_die(next.identity,
                      Transaction::make(TxType::ProfileBadge, cons_name(c), badge.encode(),
                                        cons_keys_[c], 0));
        next.cons[c] = wf::ConsLabel::RequestToken;
        out.emplace_back("CreateBadge", std::move(next));
      }
      if (s.cons[c] == wf::ConsLabel::RequestToken) {
        for (bool valid : branches(config_.validate_badge)) {
          wf::State next = s;
          if (valid) {
            payload::AccessTokenBody token;
            token.apt_ref = "wf-apt-" + cons_name(c);
            token.requester = cons_name(c);
            token.requester_key = cons_keys_[c].public_key;
            token.privilege = 0;
            token.record_uid = s.cons_cti[c];
            token.expiration = 100;
            token.badge_refs = {"wf-bdg-" + cons_name(c)};
            submit_or_die(next.activity,
                          Transaction::make(TxType::AccessToken, cons_name(c), token.encode(),
                                            cons_keys_[c], 0));
            next.cons_badge_ok[c] = 1;
            next.cons[c] = wf::ConsLabel::AccessServer;
          } else {
            next.cons[c] = wf::ConsLabel::Final;
          }
          out.emplace_back("RequestToken", std::move(next));
        }
      }
      if (s.cons[c] == wf::ConsLabel::AccessServer) {
        for (std::size_t srv = 0; srv < config_.servers; ++srv) {
          wf::State next = s;
          next.send(wf::Message{cons_name(c), srv_name(srv), wf::MsgType::Access,
                                {"wf-apt-" + cons_name(c), s.cons_cti[c]}});
          next.cons[c] = wf::ConsLabel::ValidateAccess;
          out.emplace_back("AccessServer", std::move(next));
        }
      }
      for (std::size_t m = 0; m < s.channel.size(); ++m) {
        const auto& msg = s.channel[m];
        if (msg.dst != cons_name(c) || s.cons[c] != wf::ConsLabel::ValidateAccess) continue;
        if (msg.type == wf::MsgType::No) {
          wf::State next = s;
          next.consume(m);
          next.cons[c] = wf::ConsLabel::Final;
          next.cons_denied[c] = 1;
          out.emplace_back("VerificationFailed", std::move(next));
        }
        if (msg.type == wf::MsgType::Ok) {
          wf::State next = s;
          next.consume(m);
          next.cons[c] = wf::ConsLabel::Final;
          next.cons_granted[c] = 1;
          out.emplace_back("AccessCTI", std::move(next));
        }
      }
    }

    for (std::size_t srv = 0; srv < config_.servers; ++srv) {
      for (std::size_t m = 0; m < s.channel.size(); ++m) {
        const auto& msg = s.channel[m];
        if (msg.dst != srv_name(srv) || msg.type != wf::MsgType::Access) continue;
        for (bool granted : branches(config_.verify_access)) {
          wf::State next = s;
          next.consume(m);
          next.send(wf::Message{srv_name(srv), msg.src,
                                granted ? wf::MsgType::Ok : wf::MsgType::No, {}});
          out.emplace_back("ValidateRequest", std::move(next));
        }
      }
    }

    if (!s.identity.pool().empty()) {
      wf::State next = s;
      next.identity.confirm_receipt();
      out.emplace_back("IConfirmReceipt", std::move(next));
    }
    if (!s.activity.pool().empty()) {
      wf::State next = s;
      next.activity.confirm_receipt();
      out.emplace_back("AConfirmReceipt", std::move(next));
    }
  }

  ExplorerConfig config_;
  std::vector<KeyPair> registrar_keys_;
  std::vector<KeyPair> org_keys_;
  std::vector<KeyPair> cons_keys_;
  KeyPair seed_producer_keys_;
};

// Breadth-first exhaustive exploration from the initial state. Deadlock =
// a non-terminal state with no enabled transition; termination = every
// maximal path ends with all organization/consumer roles final.
inline Result<ExplorationReport> explore(const ExplorerConfig& config) {
  WorkflowMachine machine(config);
  ExplorationReport report;
  report.workflow = workflow_name(config.workflow);

  wf::State init = machine.initial();
  std::set<Digest> visited{init.digest()};
  std::deque<std::pair<wf::State, std::size_t>> frontier;
  frontier.emplace_back(std::move(init), 1);
  report.states_found = 1;
  report.depth = 1;

  auto note_error = [&report](const std::string& why) {
    ++report.errors;
    if (report.error_notes.size() < 10) report.error_notes.push_back(why);
  };

  while (!frontier.empty()) {
    auto [state, depth] = std::move(frontier.front());
    frontier.pop_front();
    report.depth = std::max(report.depth, depth);

    if (auto violated = machine.safety_violation(state))
      note_error(*violated + " at depth " + std::to_string(depth));

    auto next_states = machine.successors(state);
    if (next_states.empty()) {
      if (!machine.is_terminal(state))
        note_error("deadlock at depth " + std::to_string(depth));
      continue;
    }
    for (auto& [label, next] : next_states) {
      ++report.states_found;
      auto digest = next.digest();
      if (visited.count(digest)) continue;
      if (visited.size() >= config.max_states)
        return Result<ExplorationReport>::failure(
            Errc::StateSpaceBudgetExceeded,
            "more than " + std::to_string(config.max_states) + " states");
      visited.insert(digest);
      frontier.emplace_back(std::move(next), depth + 1);
    }
  }
  report.distinct_states = visited.size();
  return report;
}

// The (depth, states, distinct) triple pinned as a regression fixture.
inline Result<std::tuple<std::size_t, std::uint64_t, std::uint64_t>> regression_counts(
    const ExplorerConfig& config) {
  auto report = explore(config);
  if (!report.ok())
    return Result<std::tuple<std::size_t, std::uint64_t, std::uint64_t>>(report.error());
  return std::tuple<std::size_t, std::uint64_t, std::uint64_t>{
      report.value().depth, report.value().states_found, report.value().distinct_states};
}

}  // namespace trade
