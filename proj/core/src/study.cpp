#include "fontmanifold/study.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "fontmanifold/error.hpp"
#include "fontmanifold/io.hpp"

namespace fm::study {

using nlohmann::ordered_json;

namespace {

constexpr const char* kSessionsFile = "sessions.jsonl";
constexpr const char* kLabelsFile = "labels.jsonl";
constexpr const char* kTasksFile = "tasks.jsonl";
constexpr const char* kRecordsFile = "records.jsonl";

template <typename T>
T parse_field(const nlohmann::json& j, const char* key) {
  return j.at(key).get<T>();
}

vae::LatentVector latent_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != vae::kLatentDim) throw Error(Errc::Parse, "latent must have 5 values");
  vae::LatentVector z{};
  std::copy(v.begin(), v.end(), z.begin());
  return z;
}

template <typename Fn>
auto parsing(const char* what, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Parse, std::string(what) + ": " + e.what());
  }
}

}  // namespace

ordered_json to_json(const LabeledSample& s) {
  return {{"sample_id", s.sample_id}, {"session_id", s.session_id},
          {"timestamp_ms", s.timestamp_ms}, {"sliders", s.sliders.k},
          {"latent", s.latent},       {"label", to_string(s.label)}};
}

ordered_json to_json(const StudySession& s) {
  return {{"session_id", s.session_id},
          {"participant", s.participant},
          {"started_at", s.started_at},
          {"duration_budget_s", s.duration_budget_s}};
}

ordered_json to_json(const TargetTask& t) {
  ordered_json j{{"task_id", t.task_id},
                 {"participant_id", t.participant_id},
                 {"target_id", t.target_id},
                 {"target_latent", t.target_latent},
                 {"interface", metrics::to_string(t.interface)},
                 {"issued_at", t.issued_at}};
  if (t.answer) {
    j["answer"] = {{"selected", t.answer->selected},
                   {"elapsed_ms", t.answer->elapsed_ms},
                   {"ssim", t.answer->ssim}};
  } else {
    j["answer"] = nullptr;
  }
  return j;
}

LabeledSample labeled_sample_from_json(const nlohmann::json& j) {
  return parsing("labeled sample", [&] {
    LabeledSample s;
    s.sample_id = parse_field<std::string>(j, "sample_id");
    s.session_id = parse_field<std::string>(j, "session_id");
    s.timestamp_ms = parse_field<std::int64_t>(j, "timestamp_ms");
    const auto k = parse_field<std::vector<int>>(j, "sliders");
    if (k.size() != vae::kLatentDim) throw Error(Errc::Parse, "sliders must have 5 values");
    std::copy(k.begin(), k.end(), s.sliders.k.begin());
    s.latent = latent_from(j.at("latent"));
    const auto label = parse_label(parse_field<std::string>(j, "label"));
    if (!label) throw Error(Errc::Parse, "unknown perception label");
    s.label = *label;
    try {
      vae::validate(s.sliders);
    } catch (const Error& e) {
      throw Error(Errc::Parse, std::string("labeled sample: ") + e.what());
    }
    const auto expected = vae::slider_to_latent(s.sliders);
    for (int d = 0; d < vae::kLatentDim; ++d) {
      if (std::fabs(expected[d] - s.latent[d]) > 1e-9) {
        throw Error(Errc::Parse, "labeled sample " + s.sample_id + ": latent disagrees with sliders");
      }
    }
    return s;
  });
}

StudySession session_from_json(const nlohmann::json& j) {
  return parsing("session", [&] {
    StudySession s;
    s.session_id = parse_field<std::string>(j, "session_id");
    s.participant = parse_field<std::string>(j, "participant");
    s.started_at = parse_field<std::int64_t>(j, "started_at");
    s.duration_budget_s = parse_field<int>(j, "duration_budget_s");
    return s;
  });
}

TargetTask task_from_json(const nlohmann::json& j) {
  return parsing("task", [&] {
    TargetTask t;
    t.task_id = parse_field<std::string>(j, "task_id");
    t.participant_id = parse_field<std::string>(j, "participant_id");
    t.target_id = parse_field<std::string>(j, "target_id");
    t.target_latent = latent_from(j.at("target_latent"));
    const auto iface = metrics::parse_interface(parse_field<std::string>(j, "interface"));
    if (!iface) throw Error(Errc::Parse, "unknown interface");
    t.interface = *iface;
    t.issued_at = parse_field<std::int64_t>(j, "issued_at");
    const auto& a = j.at("answer");
    if (!a.is_null()) {
      t.answer = TaskAnswer{parse_field<std::string>(a, "selected"),
                            parse_field<std::int64_t>(a, "elapsed_ms"), parse_field<double>(a, "ssim")};
    }
    return t;
  });
}

std::string labels_to_jsonl(const std::vector<LabeledSample>& samples) {
  std::string out;
  for (const auto& s : samples) out += to_json(s).dump() + "\n";
  return out;
}

std::vector<LabeledSample> labels_from_jsonl(const std::string& text) {
  std::vector<LabeledSample> out;
  for (auto line : io::split_lines(text)) {
    out.push_back(labeled_sample_from_json(parsing("labels", [&] { return nlohmann::json::parse(line); })));
  }
  return out;
}

vae::SliderVector random_start(Rng& rng) { return vae::random_sliders(rng); }

InkStats ink_stats(const GlyphBitmap& bitmap) {
  constexpr int side = GlyphBitmap::kSide;
  InkStats stats;
  double total = 0.0;
  double mass[2] = {0, 0}, moment[2] = {0, 0};
  for (int y = 0; y < side; ++y) {
    const int half = y < side / 2 ? 0 : 1;
    for (int x = 0; x < side; ++x) {
      const double v = bitmap.at(x, y);
      total += v;
      mass[half] += v;
      moment[half] += v * x;
    }
  }
  stats.ink_ratio = total / static_cast<double>(GlyphBitmap::kPixels);
  if (mass[0] > 0 && mass[1] > 0) stats.slant_px = moment[0] / mass[0] - moment[1] / mass[1];
  return stats;
}

PerceptionLabel classify(const InkStats& stats, const LabelThresholds& t) {
  if (stats.ink_ratio >= t.pop_min_ink) return PerceptionLabel::Pop;
  if (stats.ink_ratio <= t.formal_max_ink && std::fabs(stats.slant_px) <= t.formal_max_slant_px) {
    return PerceptionLabel::Formal;
  }
  return PerceptionLabel::Casual;
}

std::vector<LabeledSample> synthesize_labels(const ad::ParameterSet& params, int per_label,
                                             std::uint64_t seed, const LabelThresholds& thresholds) {
  if (per_label < 0) throw Error(Errc::InvalidArgument, "per_label must be non-negative");
  Rng rng(seed);
  int counts[3] = {0, 0, 0};
  std::vector<LabeledSample> out;
  std::uint64_t draws = 0;
  const auto full = [&] { return counts[0] >= per_label && counts[1] >= per_label && counts[2] >= per_label; };
  while (!full()) {
    if (draws++ >= thresholds.max_draws) {
      throw Error(Errc::ExhaustedSampling,
                  "after " + std::to_string(thresholds.max_draws) + " draws: POP " +
                      std::to_string(counts[0]) + ", Formal " + std::to_string(counts[1]) +
                      ", Casual " + std::to_string(counts[2]) + " of " + std::to_string(per_label));
    }
    LabeledSample s;
    s.sliders = random_start(rng);
    s.latent = vae::slider_to_latent(s.sliders);
    s.label = classify(ink_stats(vae::decode(params, s.latent)), thresholds);
    int& n = counts[static_cast<int>(s.label)];
    if (n >= per_label) continue;
    ++n;
    char id[32];
    std::snprintf(id, sizeof id, "synth-%06zu", out.size() + 1);
    s.sample_id = id;
    s.session_id = "synthetic";
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<TargetTask> create_tasks(const std::vector<vae::GeneratedGlyph>& corpus, int count,
                                     std::uint64_t seed) {
  if (count < 1) throw Error(Errc::InvalidArgument, "task count must be positive");
  if (corpus.size() < static_cast<std::size_t>(count)) {
    throw Error(Errc::CorpusTooSmall, "corpus has " + std::to_string(corpus.size()) +
                                          " images, need " + std::to_string(count));
  }
  Rng rng(seed);
  std::vector<std::size_t> index(corpus.size());
  for (std::size_t i = 0; i < index.size(); ++i) index[i] = i;
  for (std::size_t i = 0; i < static_cast<std::size_t>(count); ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(index.size() - i));
    std::swap(index[i], index[j]);
  }
  std::vector<TargetTask> tasks;
  for (metrics::Interface iface : {metrics::Interface::Manifold, metrics::Interface::Grid}) {
    for (int i = 0; i < count; ++i) {
      char buf[64];
      TargetTask t;
      std::snprintf(buf, sizeof buf, "target-%02d-%s", i + 1, metrics::to_string(iface).data());
      t.task_id = buf;
      std::snprintf(buf, sizeof buf, "gen-%04zu", index[static_cast<std::size_t>(i)]);
      t.target_id = buf;
      t.target_latent = corpus[index[static_cast<std::size_t>(i)]].latent;
      t.interface = iface;
      tasks.push_back(std::move(t));
    }
  }
  return tasks;
}

Clock system_clock() {
  return [] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
}

// -- StudyStore -----------------------------------------------------------------

StudyStore::StudyStore(std::filesystem::path data_dir, Clock clock)
    : dir_(std::move(data_dir)), clock_(std::move(clock)) {
  io::ensure_directory(dir_);
  load();
}

void StudyStore::load() {
  const auto lines_of = [&](const char* file) {
    const auto path = dir_ / file;
    return std::filesystem::exists(path) ? io::read_text(path) : std::string();
  };
  const auto parse = [](std::string_view line) {
    return parsing("study log", [&] { return nlohmann::json::parse(line); });
  };
  const std::string sessions = lines_of(kSessionsFile);
  for (auto line : io::split_lines(sessions)) {
    auto s = session_from_json(parse(line));
    sessions_[s.session_id] = s;
  }
  const std::string labels = lines_of(kLabelsFile);
  for (auto line : io::split_lines(labels)) labels_.push_back(labeled_sample_from_json(parse(line)));
  const std::string tasks = lines_of(kTasksFile);
  for (auto line : io::split_lines(tasks)) {
    TargetTask t = task_from_json(parse(line));
    if (t.participant_id.empty()) {
      templates_.push_back(std::move(t));
      continue;
    }
    if (!issued_.contains(t.task_id)) task_order_.push_back(t.task_id);
    issued_[t.task_id] = std::move(t);
  }
  const std::string records = lines_of(kRecordsFile);
  records_ = metrics::records_from_jsonl(records);
}

void StudyStore::append(const char* file, const std::string& line) {
  io::append_text(dir_ / file, line + "\n");
}

std::string StudyStore::next_id(const char* prefix, std::size_t n) const {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s-%06zu", prefix, n);
  return buf;
}

StudySession StudyStore::create_session(const std::string& participant) {
  std::lock_guard lock(mutex_);
  StudySession s;
  s.session_id = next_id("session", sessions_.size() + 1);
  while (sessions_.contains(s.session_id)) s.session_id += "x";
  s.participant = participant;
  s.started_at = clock_();
  append(kSessionsFile, to_json(s).dump());
  sessions_[s.session_id] = s;
  return s;
}

std::optional<StudySession> StudyStore::session(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(session_id);
  if (it == sessions_.end()) return std::nullopt;
  return it->second;
}

LabeledSample StudyStore::record_label(const std::string& session_id,
                                       const vae::SliderVector& sliders, PerceptionLabel label) {
  vae::validate(sliders);
  std::lock_guard lock(mutex_);
  if (!sessions_.contains(session_id)) {
    throw Error(Errc::UnknownSession, "unknown session " + session_id);
  }
  LabeledSample s;
  s.sample_id = next_id("label", labels_.size() + 1);
  s.session_id = session_id;
  s.timestamp_ms = clock_();
  s.sliders = sliders;
  s.latent = vae::slider_to_latent(sliders);
  s.label = label;
  append(kLabelsFile, to_json(s).dump());
  labels_.push_back(s);
  return s;
}

std::vector<LabeledSample> StudyStore::labels() const {
  std::lock_guard lock(mutex_);
  return labels_;
}

void StudyStore::install_tasks(const std::vector<TargetTask>& templates) {
  std::lock_guard lock(mutex_);
  if (!templates_.empty()) return;
  std::string block;
  for (const auto& t : templates) {
    if (!t.participant_id.empty() || t.answer) {
      throw Error(Errc::InvalidArgument, "task templates must be unissued");
    }
    block += to_json(t).dump() + "\n";
  }
  io::append_text(dir_ / kTasksFile, block);
  templates_ = templates;
}

std::vector<TargetTask> StudyStore::templates() const {
  std::lock_guard lock(mutex_);
  return templates_;
}

std::optional<TargetTask> StudyStore::next_task(const std::string& participant,
                                                metrics::Interface interface) {
  if (participant.empty()) throw Error(Errc::InvalidArgument, "participant id is required");
  std::lock_guard lock(mutex_);
  std::vector<std::string> seen;
  for (const auto& id : task_order_) {
    const auto& t = issued_.at(id);
    if (t.participant_id != participant || t.interface != interface) continue;
    if (!t.answer) return t;
    seen.push_back(t.target_id);
  }
  for (const auto& tmpl : templates_) {
    if (tmpl.interface != interface) continue;
    if (std::find(seen.begin(), seen.end(), tmpl.target_id) != seen.end()) continue;
    TargetTask t = tmpl;
    t.task_id = next_id("task", task_order_.size() + 1);
    t.participant_id = participant;
    t.issued_at = clock_();
    append(kTasksFile, to_json(t).dump());
    task_order_.push_back(t.task_id);
    issued_[t.task_id] = t;
    return t;
  }
  return std::nullopt;
}

TargetTask StudyStore::task(const std::string& task_id) const {
  std::lock_guard lock(mutex_);
  const auto it = issued_.find(task_id);
  if (it == issued_.end()) throw Error(Errc::UnknownTask, "unknown task " + task_id);
  return it->second;
}

metrics::ComparisonRecord StudyStore::answer_task(const std::string& task_id,
                                                  const std::string& selected,
                                                  const GlyphBitmap& selected_bitmap,
                                                  const GlyphBitmap& target_bitmap,
                                                  std::int64_t elapsed_ms) {
  if (elapsed_ms <= 0) throw Error(Errc::InvalidArgument, "elapsed_ms must be positive");
  std::lock_guard lock(mutex_);
  const auto it = issued_.find(task_id);
  if (it == issued_.end()) throw Error(Errc::UnknownTask, "unknown task " + task_id);
  if (it->second.answer) throw Error(Errc::AlreadyAnswered, "task " + task_id + " already answered");
  TargetTask t = it->second;
  t.answer = TaskAnswer{selected, elapsed_ms, metrics::ssim(target_bitmap, selected_bitmap)};
  metrics::ComparisonRecord record{t.participant_id, t.interface,  t.task_id,
                                   t.target_id,      selected,     t.answer->ssim,
                                   elapsed_ms};
  append(kTasksFile, to_json(t).dump());
  append(kRecordsFile, metrics::to_json(record).dump());
  it->second = std::move(t);
  records_.push_back(record);
  return record;
}

std::vector<metrics::ComparisonRecord> StudyStore::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

}  // namespace fm::study
