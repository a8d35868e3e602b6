#pragma once

#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "distcox/csv.hpp"
#include "distcox/diagnostics.hpp"
#include "distcox/error.hpp"
#include "distcox/model.hpp"
#include "distcox/site_summary.hpp"

namespace distcox {

enum class MessageKind {
  HandshakeRequest,   // center -> partner: the regression spec
  HandshakeReply,     // partner -> center: censoring summary, covariate sums,
                      //                    local event-time grid (center path)
  Iterate,            // center -> partner: current beta (+ designated grid)
  SummaryReply,       // partner -> center: risk summaries or score contributions
  Finalize,           // center -> partner: final beta + baseline hazards
  DiagnosticsReply,   // partner -> center: binned residual summary
  Stop,               // either direction: run status
};

const char* message_kind_name(MessageKind kind);

// One round's payload. Exactly the parts implied by `kind` are populated.
struct RoundMessage {
  std::string run_id;
  int round = 0;
  MessageKind kind = MessageKind::Stop;

  ModelSpec spec;                               // HandshakeRequest
  EventTimeGrid grid;                           // HandshakeReply / Iterate
  CensoringSummary censoring;                   // HandshakeReply
  std::vector<CovariateSums> covariate_sums;    // HandshakeReply
  Vector beta;                                  // Iterate / Finalize
  bool final_round = false;                     // Iterate: covariance round
  std::vector<StratumRiskSummaries> summaries;  // SummaryReply (center path)
  std::vector<ScoreContribution> scores;        // SummaryReply (site path)
  BaselineHazard baseline;                      // SummaryReply(final) / Finalize
  BinnedResidualSummary bins;                   // DiagnosticsReply
  std::string status;                           // Stop: ok|not_converged|error
  std::string reason;                           // Stop
  ErrorClass error_class = ErrorClass::Protocol;  // Stop(status=error)
};

struct Direction {
  bool to_partner = true;  // center -> partner k, else partner k -> center
  int partner_id = 0;
};

std::string direction_name(const Direction& dir);

// In-memory mailbox shared by center and partners running in one process.
struct LoopbackBus {
  std::mutex mu;
  std::condition_variable cv;
  std::map<std::string, RoundMessage> mail;
};

struct TransportConfig {
  enum class Mode { Directory, Loopback };
  Mode mode = Mode::Directory;
  std::filesystem::path root;       // Directory mode
  double wait_time_min = 3.0;       // seconds between trigger-file checks
  double wait_time_max = 7200.0;    // total wait budget per message
  std::shared_ptr<LoopbackBus> bus; // Loopback mode
};

TransportConfig loopback_transport(double wait_max = 30.0);

// Serializes a message into named tables; the manifest (file list with row
// counts plus scalar metadata) comes last. decode_message is its inverse and
// throws MalformedPayload naming the offending file and column.
std::vector<std::pair<std::string, csv::Table>> encode_message(
    const RoundMessage& msg);
RoundMessage decode_message(
    const std::map<std::string, csv::Table>& files);

// Directory mode writes the payload files into
//   <root>/<run_id>/<direction>/round_<n>/
// and creates the zero-byte trigger `files_done.ok` last; loopback mode
// enqueues in memory. A mailbox may be used once per (run, round, direction);
// reuse raises MailboxCollision.
void send(const TransportConfig& cfg, const Direction& dir,
          const RoundMessage& msg);

// Polls for the trigger file every wait_time_min seconds until wait_time_max
// is exhausted (Timeout). Returns the parsed message.
RoundMessage await(const TransportConfig& cfg, const Direction& dir,
                   const std::string& run_id, int round);

}  // namespace distcox
