#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "trade/explorer.hpp"

using namespace trade;

namespace {

ExplorerConfig cfg(Workflow w) {
  ExplorerConfig c;
  c.workflow = w;
  return c;
}

// walk one path by always firing the first enabled transition with the given
// label preference order
wf::State fire(const WorkflowMachine& m, const wf::State& s, const std::string& label,
               std::size_t binding = 0) {
  std::size_t seen = 0;
  for (auto& [l, next] : m.successors(s)) {
    if (l == label) {
      if (seen == binding) return next;
      ++seen;
    }
  }
  REQUIRE_MESSAGE(false, "transition not enabled: ", label);
  return s;
}

}  // namespace

TEST_CASE("registration: setup first, then preparation") {
  WorkflowMachine m(cfg(Workflow::Registration));
  auto s0 = m.initial();
  CHECK(m.enabled_transitions(s0) == std::vector<std::string>{"Setup"});
  auto s1 = fire(m, s0, "Setup");
  CHECK(m.enabled_transitions(s1) == std::vector<std::string>{"Preparation"});
}

TEST_CASE("registration: hand-traced happy path") {
  WorkflowMachine m(cfg(Workflow::Registration));
  auto s = m.initial();

  // canonical path: each step has exactly the expected transitions enabled
  s = fire(m, s, "Setup");
  CHECK(m.enabled_transitions(s) == std::vector<std::string>{"Preparation"});
  s = fire(m, s, "Preparation");
  CHECK(m.enabled_transitions(s) == std::vector<std::string>{"Register"});
  s = fire(m, s, "Register");
  // org now waits for M_Identity; only the registrar can move
  CHECK(m.enabled_transitions(s) == std::vector<std::string>{"Verification"});
  s = fire(m, s, "Verification");
  CHECK(m.enabled_transitions(s) == std::vector<std::string>{"BlockchainIdentityCreation"});
  s = fire(m, s, "BlockchainIdentityCreation");
  // both identity txs are pending now
  CHECK(s.identity.pool().size() == 2);
  CHECK(m.enabled_transitions(s) ==
        std::vector<std::string>{"SaveMapping", "ConfirmReceipt"});
  s = fire(m, s, "ConfirmReceipt");
  CHECK(s.identity.pool().empty());
  CHECK(s.identity.chain().size() == 1);
  CHECK(s.identity.chain()[0].confirmed.size() == 2);
  s = fire(m, s, "SaveMapping");
  CHECK(m.enabled_transitions(s) == std::vector<std::string>{"ReceiveBlockchainIdentity"});
  s = fire(m, s, "ReceiveBlockchainIdentity");
  // all roles done: only Termination remains
  CHECK(m.is_terminal(s));
  CHECK(m.enabled_transitions(s) == std::vector<std::string>{"Termination"});
  CHECK(!m.safety_violation(s).has_value());
  CHECK(s.org_identity_received[0] == 1);
}

TEST_CASE("registration failure path ends final without identity") {
  auto c = cfg(Workflow::Registration);
  c.verify_profile = Outcome::Failure;
  WorkflowMachine m(c);
  auto s = m.initial();
  s = fire(m, s, "Setup");
  s = fire(m, s, "Preparation");
  s = fire(m, s, "Register");
  s = fire(m, s, "Verification");  // fails, M_NO sent
  CHECK(m.enabled_transitions(s) == std::vector<std::string>{"VerificationFailed"});
  s = fire(m, s, "VerificationFailed");
  CHECK(m.is_terminal(s));
  CHECK(s.org_identity_received[0] == 0);
  CHECK(s.org_failure_received[0] == 1);
  CHECK(s.identity.chain().empty());  // nothing ever reached the ledger
}

TEST_CASE("org blocked on a message is not a deadlock") {
  WorkflowMachine m(cfg(Workflow::Registration));
  auto s = m.initial();
  s = fire(m, s, "Setup");
  s = fire(m, s, "Preparation");
  s = fire(m, s, "Register");
  s = fire(m, s, "Verification");
  // org is waiting; registrar mid-flow: registrar transitions only
  auto labels = m.enabled_transitions(s);
  CHECK(labels == std::vector<std::string>{"BlockchainIdentityCreation"});
  CHECK(!m.is_terminal(s));
}

TEST_CASE("exploration of all six table configurations is clean") {
  struct Row {
    const char* name;
    ExplorerConfig config;
  };
  std::vector<Row> rows;
  rows.push_back({"registration", cfg(Workflow::Registration)});
  {
    auto c = cfg(Workflow::Registration);
    c.verify_profile = Outcome::Failure;
    rows.push_back({"registration-failure", c});
  }
  {
    auto c = cfg(Workflow::PolicyCreation);
    c.pool = 2;
    rows.push_back({"policy-creation", c});
  }
  rows.push_back({"cti-insertion", cfg(Workflow::CtiInsertion)});
  {
    auto c = cfg(Workflow::CtiInsertion);
    c.insert_cti = Outcome::Failure;
    rows.push_back({"cti-insertion-failure", c});
  }
  rows.push_back({"access-authorization", cfg(Workflow::AccessAuthorization)});
  {
    auto c = cfg(Workflow::AccessAuthorization);
    c.validate_badge = Outcome::Failure;
    rows.push_back({"access-authorization-badge-failure", c});
  }

  for (const auto& row : rows) {
    CAPTURE(row.name);
    auto report = explore(row.config);
    REQUIRE(report.ok());
    CHECK(report.value().errors == 0);
    CHECK(report.value().distinct_states > 0);
    CHECK(report.value().distinct_states <= report.value().states_found);
  }
}

TEST_CASE("failure injection explores both branches without errors") {
  for (auto w : {Workflow::Registration, Workflow::CtiInsertion,
                 Workflow::AccessAuthorization}) {
    CAPTURE(workflow_name(w));
    auto c = cfg(w);
    c.verify_profile = Outcome::Both;
    c.insert_cti = Outcome::Both;
    c.validate_badge = Outcome::Both;
    c.verify_access = Outcome::Both;
    auto report = explore(c);
    REQUIRE(report.ok());
    CHECK(report.value().errors == 0);
  }
}

TEST_CASE("exploration is deterministic") {
  auto c = cfg(Workflow::Registration);
  c.orgs = 2;
  c.registrars = 2;
  c.pool = 2;
  c.verify_profile = Outcome::Both;
  auto a = explore(c);
  auto b = explore(c);
  REQUIRE(a.ok());
  REQUIRE(b.ok());
  CHECK(a.value().depth == b.value().depth);
  CHECK(a.value().states_found == b.value().states_found);
  CHECK(a.value().distinct_states == b.value().distinct_states);
  CHECK(a.value().errors == 0);
}

TEST_CASE("confirmation is confluent: any interleaving reaches the same block set") {
  // in the registration workflow, explore with 2 orgs and collect the
  // confirmed-transaction set of every terminal state: all orderings of
  // ConfirmReceipt against other transitions must agree on the final set
  auto c = cfg(Workflow::Registration);
  c.orgs = 2;
  c.pool = 2;
  WorkflowMachine m(c);

  std::set<std::set<std::string>> terminal_tx_sets;
  std::deque<wf::State> frontier{m.initial()};
  std::set<Digest> visited{frontier.front().digest()};
  while (!frontier.empty()) {
    wf::State s = std::move(frontier.front());
    frontier.pop_front();
    auto next = m.successors(s);
    bool quiescent = true;
    for (auto& [label, n] : next) {
      (void)label;
      quiescent = false;
      auto d = n.digest();
      if (visited.insert(d).second) frontier.push_back(std::move(n));
    }
    if (quiescent && m.is_terminal(s)) {
      std::set<std::string> txs;
      for (const auto& block : s.identity.chain())
        for (const auto& tx : block.confirmed) txs.insert(tx.tx_id.hex());
      // also count leftovers: terminal quiescent states have empty pools
      CHECK(s.identity.pool().empty());
      terminal_tx_sets.insert(std::move(txs));
    }
  }
  REQUIRE(!terminal_tx_sets.empty());
  CHECK(terminal_tx_sets.size() == 1);
}

TEST_CASE("state-space budget is enforced") {
  auto c = cfg(Workflow::Registration);
  c.orgs = 2;
  c.registrars = 2;
  c.pool = 3;
  c.verify_profile = Outcome::Both;
  c.max_states = 50;
  auto r = explore(c);
  REQUIRE(!r.ok());
  CHECK(r.code() == Errc::StateSpaceBudgetExceeded);
}

TEST_CASE("regression fixtures: pinned triples are stable") {
  // regenerate with: trade explore --golden (see tools/)
  std::ifstream golden(std::string(TRADE_GOLDEN_DIR) + "/exploration.txt");
  REQUIRE_MESSAGE(golden.good(), "missing exploration fixture");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(golden, line)) {
    if (line.empty() || line[0] == '#') continue;
    // name|orgs|registrars|servers|consumers|pool|injection|depth|states|distinct
    std::vector<std::string> f;
    std::string cur;
    for (char ch : line + "|") {
      if (ch == '|') {
        f.push_back(cur);
        cur.clear();
      } else
        cur.push_back(ch);
    }
    REQUIRE(f.size() == 10);
    auto w = workflow_from_name(f[0]);
    REQUIRE(w.has_value());
    ExplorerConfig config;
    config.workflow = *w;
    config.orgs = std::stoul(f[1]);
    config.registrars = std::stoul(f[2]);
    config.servers = std::stoul(f[3]);
    config.consumers = std::stoul(f[4]);
    config.pool = std::stoul(f[5]);
    if (f[6] == "failure") {
      config.verify_profile = Outcome::Failure;
      config.insert_cti = Outcome::Failure;
      config.validate_badge = Outcome::Failure;
      config.verify_access = Outcome::Failure;
    } else if (f[6] == "both") {
      config.verify_profile = Outcome::Both;
      config.insert_cti = Outcome::Both;
      config.validate_badge = Outcome::Both;
      config.verify_access = Outcome::Both;
    }
    auto triple = regression_counts(config);
    REQUIRE(triple.ok());
    CAPTURE(line);
    CHECK(std::get<0>(triple.value()) == std::stoul(f[7]));
    CHECK(std::get<1>(triple.value()) == std::stoull(f[8]));
    CHECK(std::get<2>(triple.value()) == std::stoull(f[9]));
    ++rows;
  }
  CHECK(rows >= 7);
}
