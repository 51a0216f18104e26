#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace robustdp {

/// Broad failure class, used by the CLI to pick an exit code.
enum class ErrorClass { input, assumption, numeric };

class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message, ErrorClass cls)
      : std::runtime_error(message), code_(std::move(code)), cls_(cls) {}

  const std::string& code() const noexcept { return code_; }
  ErrorClass error_class() const noexcept { return cls_; }

 private:
  std::string code_;
  ErrorClass cls_;
};

#define ROBUSTDP_ERROR(Name, Cls)                                   \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& message)                       \
        : Error(#Name, message, ErrorClass::Cls) {}                 \
  };

ROBUSTDP_ERROR(ParseError, input)
ROBUSTDP_ERROR(StructureError, input)
ROBUSTDP_ERROR(ProbabilityError, input)
ROBUSTDP_ERROR(UnknownNode, input)
ROBUSTDP_ERROR(UnknownLeaf, input)
ROBUSTDP_ERROR(ParameterError, input)
ROBUSTDP_ERROR(WeightError, numeric)
ROBUSTDP_ERROR(NaNError, numeric)
ROBUSTDP_ERROR(DegenerateError, numeric)
ROBUSTDP_ERROR(DomainError, numeric)
ROBUSTDP_ERROR(SearchExhausted, numeric)
ROBUSTDP_ERROR(GenerationExhausted, numeric)
ROBUSTDP_ERROR(BetaNotFound, numeric)
ROBUSTDP_ERROR(LambdaError, input)
ROBUSTDP_ERROR(NoArbitrageViolation, assumption)
ROBUSTDP_ERROR(RAEViolation, assumption)

#undef ROBUSTDP_ERROR

/// A named modelling assumption does not hold on the instance.
class AssumptionFailure : public Error {
 public:
  AssumptionFailure(std::string assumption, std::string node,
                    const std::string& message,
                    std::string code = "AssumptionFailure")
      : Error(std::move(code), message, ErrorClass::assumption),
        assumption_(std::move(assumption)),
        node_(std::move(node)) {}

  const std::string& assumption() const noexcept { return assumption_; }
  const std::string& node() const noexcept { return node_; }

 private:
  std::string assumption_;
  std::string node_;
};

/// 0 is not in the relative interior of the support hull at `node`.
class NAFailure : public AssumptionFailure {
 public:
  NAFailure(std::string node, std::vector<double> witness,
            const std::string& message)
      : AssumptionFailure("no_arbitrage", std::move(node), message,
                          "NAFailure"),
        witness_(std::move(witness)) {}

  const std::vector<double>& witness() const noexcept { return witness_; }

 private:
  std::vector<double> witness_;
};

class NtUnbounded : public AssumptionFailure {
 public:
  NtUnbounded(std::string node, const std::string& message)
      : AssumptionFailure("pb_inequality", std::move(node), message,
                          "NtUnbounded") {}
};

/// A clause of the type-(A) definition failed; `witness` is free text
/// naming leaf, wealth and scale where available.
class CertificationFailure : public AssumptionFailure {
 public:
  CertificationFailure(std::string clause, std::string witness,
                       const std::string& message)
      : AssumptionFailure(clause, "", message, "CertificationFailure"),
        clause_(std::move(clause)),
        witness_(std::move(witness)) {}

  const std::string& clause() const noexcept { return clause_; }
  const std::string& witness() const noexcept { return witness_; }

 private:
  std::string clause_;
  std::string witness_;
};

}  // namespace robustdp
