#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>

namespace trade {

enum class Errc {
  // ledger
  UnknownSubmitter,
  ForbiddenTransactionType,
  BadSignature,
  DuplicateTxId,
  // policy engine
  SyntaxError,
  UnknownOperator,
  EmptyCombine,
  MissingAttribute,
  TypeMismatch,
  DomainTooLarge,
  // identity network
  VerificationFailed,
  UnknownRegistrar,
  UnknownOrganization,
  RevokedIdentity,
  NotOwner,
  UnknownPolicy,
  PolicyNotSatisfied,
  NotGranted,
  DuplicateVote,
  // activity network
  MalformedRecord,
  UnknownRecord,
  UnknownPrivilege,
  InvalidBadge,
  PolicyCoverageIncomplete,
  UnknownAPT,
  // cti server
  InsertionFailed,
  StaleTimestamp,
  AuthenticationFailed,
  PrivilegeMismatch,
  ExpiredToken,
  // client sdk
  ConsumptionPolicyRejected,
  DataAuthenticationFailed,
  // incentives
  InsufficientKarma,
  NotAConsumer,
  AlreadyRated,
  StarsOutOfRange,
  AlreadySigned,
  NoSuchContract,
  LegalSignatureRequired,
  // workflow explorer
  StateSpaceBudgetExceeded,
  // cli / tooling
  ScriptParseError,
  ReferenceError,
  MalformedDump,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::UnknownSubmitter: return "UnknownSubmitter";
    case Errc::ForbiddenTransactionType: return "ForbiddenTransactionType";
    case Errc::BadSignature: return "BadSignature";
    case Errc::DuplicateTxId: return "DuplicateTxId";
    case Errc::SyntaxError: return "SyntaxError";
    case Errc::UnknownOperator: return "UnknownOperator";
    case Errc::EmptyCombine: return "EmptyCombine";
    case Errc::MissingAttribute: return "MissingAttribute";
    case Errc::TypeMismatch: return "TypeMismatch";
    case Errc::DomainTooLarge: return "DomainTooLarge";
    case Errc::VerificationFailed: return "VerificationFailed";
    case Errc::UnknownRegistrar: return "UnknownRegistrar";
    case Errc::UnknownOrganization: return "UnknownOrganization";
    case Errc::RevokedIdentity: return "RevokedIdentity";
    case Errc::NotOwner: return "NotOwner";
    case Errc::UnknownPolicy: return "UnknownPolicy";
    case Errc::PolicyNotSatisfied: return "PolicyNotSatisfied";
    case Errc::NotGranted: return "NotGranted";
    case Errc::DuplicateVote: return "DuplicateVote";
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::UnknownRecord: return "UnknownRecord";
    case Errc::UnknownPrivilege: return "UnknownPrivilege";
    case Errc::InvalidBadge: return "InvalidBadge";
    case Errc::PolicyCoverageIncomplete: return "PolicyCoverageIncomplete";
    case Errc::UnknownAPT: return "UnknownAPT";
    case Errc::InsertionFailed: return "InsertionFailed";
    case Errc::StaleTimestamp: return "StaleTimestamp";
    case Errc::AuthenticationFailed: return "AuthenticationFailed";
    case Errc::PrivilegeMismatch: return "PrivilegeMismatch";
    case Errc::ExpiredToken: return "ExpiredToken";
    case Errc::ConsumptionPolicyRejected: return "ConsumptionPolicyRejected";
    case Errc::DataAuthenticationFailed: return "DataAuthenticationFailed";
    case Errc::InsufficientKarma: return "InsufficientKarma";
    case Errc::NotAConsumer: return "NotAConsumer";
    case Errc::AlreadyRated: return "AlreadyRated";
    case Errc::StarsOutOfRange: return "StarsOutOfRange";
    case Errc::AlreadySigned: return "AlreadySigned";
    case Errc::NoSuchContract: return "NoSuchContract";
    case Errc::LegalSignatureRequired: return "LegalSignatureRequired";
    case Errc::StateSpaceBudgetExceeded: return "StateSpaceBudgetExceeded";
    case Errc::ScriptParseError: return "ScriptParseError";
    case Errc::ReferenceError: return "ReferenceError";
    case Errc::MalformedDump: return "MalformedDump";
  }
  return "UnknownError";
}

struct Error {
  Errc code;
  std::string detail;
  // Byte offset (policy parser) or line number (scenario scripts).
  std::size_t pos = 0;

  std::string to_string() const {
    std::string out = errc_name(code);
    if (!detail.empty()) {
      out += ": ";
      out += detail;
    }
    return out;
  }
};

// Minimal expected<T, Error>. value() on an error result throws, which turns
// a forgotten check into a loud test failure instead of UB.
template <typename T>
class [[nodiscard]] Result {
 public:
  Result(T value) : state_(std::move(value)) {}
  Result(Error error) : state_(std::move(error)) {}

  static Result failure(Errc code, std::string detail = "", std::size_t pos = 0) {
    return Result(Error{code, std::move(detail), pos});
  }

  bool ok() const { return std::holds_alternative<T>(state_); }
  explicit operator bool() const { return ok(); }

  const T& value() const& {
    if (!ok()) throw std::runtime_error("Result::value on error: " + error().to_string());
    return std::get<T>(state_);
  }

  T& value() & {
    if (!ok()) throw std::runtime_error("Result::value on error: " + error().to_string());
    return std::get<T>(state_);
  }

  T&& value() && {
    if (!ok()) throw std::runtime_error("Result::value on error: " + error().to_string());
    return std::get<T>(std::move(state_));
  }

  const Error& error() const {
    if (ok()) throw std::runtime_error("Result::error on value");
    return std::get<Error>(state_);
  }

  Errc code() const { return error().code; }

 private:
  std::variant<T, Error> state_;
};

// For operations whose success carries no payload.
struct Unit {};
using Status = Result<Unit>;

inline Status ok_status() { return Status(Unit{}); }

}  // namespace trade
