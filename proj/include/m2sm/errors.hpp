#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace m2sm {

/// Base of every error raised by the library. `code()` is a stable
/// machine-readable identifier that the CLI prints alongside the message.
class Error : public std::runtime_error {
 public:
  Error(std::string_view code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  std::string_view code() const noexcept { return code_; }

 private:
  std::string_view code_;
};

#define M2SM_DEFINE_ERROR(Name, Code)                                  \
  class Name : public Error {                                          \
   public:                                                             \
    explicit Name(const std::string& what) : Error(Code, what) {}      \
  };

M2SM_DEFINE_ERROR(IngestionError, "E_INGESTION")
M2SM_DEFINE_ERROR(SchemaError, "E_SCHEMA")
M2SM_DEFINE_ERROR(FormatError, "E_FORMAT")
M2SM_DEFINE_ERROR(SplitError, "E_SPLIT")
M2SM_DEFINE_ERROR(ConfigError, "E_CONFIG")
M2SM_DEFINE_ERROR(EncodeError, "E_ENCODE")
M2SM_DEFINE_ERROR(AttentionError, "E_ATTENTION")
M2SM_DEFINE_ERROR(BiHopUnavailable, "E_BIHOP_UNAVAILABLE")
M2SM_DEFINE_ERROR(FusionError, "E_FUSION")
M2SM_DEFINE_ERROR(LabelError, "E_LABEL")
M2SM_DEFINE_ERROR(LossError, "E_LOSS")
M2SM_DEFINE_ERROR(RewardError, "E_REWARD")
M2SM_DEFINE_ERROR(TrainingError, "E_TRAINING")
M2SM_DEFINE_ERROR(EvalError, "E_EVAL")
M2SM_DEFINE_ERROR(CheckpointError, "E_CHECKPOINT")
M2SM_DEFINE_ERROR(CliError, "E_CLI")

#undef M2SM_DEFINE_ERROR

}  // namespace m2sm
