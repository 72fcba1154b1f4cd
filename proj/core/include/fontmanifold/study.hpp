#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fontmanifold/metrics.hpp"
#include "fontmanifold/perception.hpp"
#include "fontmanifold/vae.hpp"

namespace fm::study {

struct LabeledSample {
  std::string sample_id;
  std::string session_id;
  std::int64_t timestamp_ms = 0;
  vae::SliderVector sliders;
  vae::LatentVector latent{};
  PerceptionLabel label = PerceptionLabel::Pop;

  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

inline constexpr int kSessionBudgetSeconds = 300;

struct StudySession {
  std::string session_id;
  std::string participant;
  std::int64_t started_at = 0;
  int duration_budget_s = kSessionBudgetSeconds;  // advisory, enforced by the client

  friend bool operator==(const StudySession&, const StudySession&) = default;
};

struct TaskAnswer {
  std::string selected;
  std::int64_t elapsed_ms = 0;
  double ssim = 0.0;

  friend bool operator==(const TaskAnswer&, const TaskAnswer&) = default;
};

/// A target-search task. Templates (participant_id empty) come from
/// create_tasks; the store issues one copy per participant.
struct TargetTask {
  std::string task_id;
  std::string participant_id;
  std::string target_id;  // gen-NNNN, index into the generated corpus
  vae::LatentVector target_latent{};
  metrics::Interface interface = metrics::Interface::Manifold;
  std::int64_t issued_at = 0;
  std::optional<TaskAnswer> answer;

  friend bool operator==(const TargetTask&, const TargetTask&) = default;
};

nlohmann::ordered_json to_json(const LabeledSample& s);
nlohmann::ordered_json to_json(const StudySession& s);
nlohmann::ordered_json to_json(const TargetTask& t);
/// Parsers throw Errc::Parse; labeled samples are re-validated against the
/// slider map.
LabeledSample labeled_sample_from_json(const nlohmann::json& j);
StudySession session_from_json(const nlohmann::json& j);
TargetTask task_from_json(const nlohmann::json& j);

std::string labels_to_jsonl(const std::vector<LabeledSample>& samples);
std::vector<LabeledSample> labels_from_jsonl(const std::string& text);

/// Five independent uniform slider positions.
vae::SliderVector random_start(Rng& rng);

/// Decoded-image statistics used by the synthetic labeler.
struct InkStats {
  double ink_ratio = 0.0;  // mean pixel value
  double slant_px = 0.0;   // ink centroid x of the top half minus the bottom half
};

InkStats ink_stats(const GlyphBitmap& bitmap);

struct LabelThresholds {
  double pop_min_ink = 0.28;
  double formal_max_ink = 0.18;
  double formal_max_slant_px = 1.0;
  std::uint64_t max_draws = 1'000'000;
};

PerceptionLabel classify(const InkStats& stats, const LabelThresholds& thresholds = {});

/// Rejection sampling over random slider positions until every label has
/// `per_label` samples. Output is in draw order.
/// Throws Errc::ExhaustedSampling when max_draws is reached first.
std::vector<LabeledSample> synthesize_labels(const ad::ParameterSet& params, int per_label,
                                             std::uint64_t seed,
                                             const LabelThresholds& thresholds = {});

/// `count` distinct targets drawn without replacement, each issued on both
/// interfaces (2 * count templates, manifold arm first).
/// Throws Errc::CorpusTooSmall.
std::vector<TargetTask> create_tasks(const std::vector<vae::GeneratedGlyph>& corpus, int count = 10,
                                     std::uint64_t seed = 7);

/// Milliseconds since the Unix epoch.
using Clock = std::function<std::int64_t()>;
Clock system_clock();

/// Append-only study logs under one directory:
///   sessions.jsonl, labels.jsonl, tasks.jsonl (one snapshot per change,
///   the last line for a task_id wins), records.jsonl.
/// All mutating calls are serialized by one mutex.
class StudyStore {
 public:
  explicit StudyStore(std::filesystem::path data_dir, Clock clock = system_clock());

  const std::filesystem::path& data_dir() const noexcept { return dir_; }

  StudySession create_session(const std::string& participant);
  std::optional<StudySession> session(const std::string& session_id) const;

  /// Errors: UnknownSession, Range.
  LabeledSample record_label(const std::string& session_id, const vae::SliderVector& sliders,
                             PerceptionLabel label);
  std::vector<LabeledSample> labels() const;

  /// Stores templates once; later calls with a task list are ignored so a
  /// restarted service keeps its targets.
  void install_tasks(const std::vector<TargetTask>& templates);
  std::vector<TargetTask> templates() const;

  /// The participant's open task on `interface`, or the next template they
  /// have not been issued yet. Empty when every target has been answered.
  std::optional<TargetTask> next_task(const std::string& participant, metrics::Interface interface);

  /// Throws Errc::UnknownTask.
  TargetTask task(const std::string& task_id) const;

  /// Errors: UnknownTask, AlreadyAnswered, InvalidArgument (elapsed_ms <= 0).
  metrics::ComparisonRecord answer_task(const std::string& task_id, const std::string& selected,
                                        const GlyphBitmap& selected_bitmap,
                                        const GlyphBitmap& target_bitmap, std::int64_t elapsed_ms);

  std::vector<metrics::ComparisonRecord> records() const;

 private:
  void load();
  void append(const char* file, const std::string& line);
  std::string next_id(const char* prefix, std::size_t n) const;

  std::filesystem::path dir_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::map<std::string, StudySession> sessions_;
  std::vector<LabeledSample> labels_;
  std::vector<TargetTask> templates_;
  std::vector<std::string> task_order_;        // issued tasks in issue order
  std::map<std::string, TargetTask> issued_;  // by task_id
  std::vector<metrics::ComparisonRecord> records_;
};

}  // namespace fm::study
