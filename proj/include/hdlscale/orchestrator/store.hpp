#pragma once

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

extern "C" {
#include <fcntl.h>
#include <unistd.h>
}

#include "hdlscale/core/config.hpp"
#include "hdlscale/core/json_io.hpp"
#include "hdlscale/core/suite.hpp"
#include "hdlscale/core/types.hpp"

namespace hdlscale {

inline constexpr int kStoreLayoutVersion = 1;

struct ProblemProgress {
  std::string problem_id;
  int samples_done = 0;
  std::optional<int> first_pass_index;  // 1-based
  bool terminal = false;
};

// Immutable view of a store, the input to every analysis.
struct StoreSnapshot {
  CampaignConfig config;
  std::vector<Problem> problems;                    // sorted by id
  std::map<std::string, std::vector<Sample>> samples;  // dense, index order
  std::map<std::string, UsageRecord> overshoot_usage;  // discarded speculative samples

  const std::vector<Sample>& samples_of(const std::string& id) const {
    static const std::vector<Sample> kEmpty;
    auto it = samples.find(id);
    return it == samples.end() ? kEmpty : it->second;
  }

  ProblemProgress progress(const std::string& id) const {
    ProblemProgress p;
    p.problem_id = id;
    const auto& s = samples_of(id);
    p.samples_done = static_cast<int>(s.size());
    for (const auto& sample : s) {
      if (sample.verdict.passed()) {
        p.first_pass_index = sample.index;
        break;
      }
    }
    p.terminal = p.samples_done >= config.samples_cap() ||
                 (config.mode() == StopMode::EarlyStop && p.first_pass_index.has_value());
    return p;
  }
};

namespace detail {

inline void append_line(const fs::path& file, const std::string& line) {
  int fd = ::open(file.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(Errc::Io, "open " + file.string() + ": " + std::strerror(errno));
  // One write() per record keeps lines whole if the process dies.
  std::string data = line + "\n";
  const char* p = data.data();
  std::size_t left = data.size();
  while (left > 0) {
    ssize_t n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      int err = errno;
      ::close(fd);
      throw Error(Errc::Io, "write " + file.string() + ": " + std::strerror(err));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  ::close(fd);
}

// Complete (newline-terminated) lines; a trailing partial line is ignored.
inline std::vector<std::string> read_complete_lines(const fs::path& file,
                                                    std::size_t* complete_bytes = nullptr) {
  std::vector<std::string> lines;
  if (!fs::exists(file)) {
    if (complete_bytes) *complete_bytes = 0;
    return lines;
  }
  std::string data = read_file(file);
  std::size_t start = 0;
  for (std::size_t nl = data.find('\n'); nl != std::string::npos; nl = data.find('\n', start)) {
    if (nl > start) lines.push_back(data.substr(start, nl - start));
    start = nl + 1;
  }
  if (complete_bytes) *complete_bytes = start;
  return lines;
}

}  // namespace detail

// On-disk layout:
//   <root>/campaign.json                      config snapshot + layout version
//   <root>/suite.jsonl                        problems the campaign runs on
//   <root>/problems/<id>/samples.jsonl        one Sample per line, append-only
//   <root>/problems/<id>/overshoot.jsonl      speculative samples past an early stop
//   <root>/problems/<id>/failed/<index>/      retained scratch dirs (debug)
class CampaignStore {
 public:
  static CampaignStore create(const fs::path& root, const CampaignConfig& config,
                              const std::vector<Problem>& problems) {
    std::error_code ec;
    fs::create_directories(root / "problems", ec);
    if (ec) throw Error(Errc::OutputDirNotWritable, root.string() + ": " + ec.message());
    if (::access(root.c_str(), W_OK) != 0)
      throw Error(Errc::OutputDirNotWritable, root.string());
    if (fs::exists(root / "campaign.json"))
      throw Error(Errc::ConfigMismatch, root.string() + " already holds a campaign");

    CampaignStore store;
    store.root_ = root;
    store.config_ = config;
    store.problems_ = problems;
    for (const auto& p : problems) {
      fs::create_directories(store.problem_dir(p.id), ec);
      if (ec) throw Error(Errc::OutputDirNotWritable, store.problem_dir(p.id).string());
    }
    save_suite_jsonl(problems, root / "suite.jsonl");
    json ids = json::array();
    for (const auto& p : problems) ids.push_back(p.id);
    json doc{{"layout_version", kStoreLayoutVersion},
             {"config", to_json(config)},
             {"problems", ids},
             {"created_at", format_timestamp(now_utc())}};
    // campaign.json last: its presence marks a complete store skeleton.
    const fs::path tmp = root / "campaign.json.tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << doc.dump(2) << '\n';
      if (!out) throw Error(Errc::OutputDirNotWritable, tmp.string());
    }
    fs::rename(tmp, root / "campaign.json");
    return store;
  }

  static CampaignStore open(const fs::path& root) {
    const fs::path meta = root / "campaign.json";
    if (!fs::is_regular_file(meta))
      throw Error(Errc::ConfigMismatch, "no campaign.json in " + root.string());
    json doc;
    try {
      doc = json::parse(read_file(meta));
    } catch (const json::exception& e) {
      throw Error(Errc::ConfigMismatch, meta.string() + ": " + e.what());
    }
    if (doc.value("layout_version", -1) != kStoreLayoutVersion)
      throw Error(Errc::ConfigMismatch, meta.string() + ": unsupported layout version");

    CampaignStore store;
    store.root_ = root;
    try {
      store.config_ = config_from_json(doc.at("config"));
    } catch (const json::exception& e) {
      throw Error(Errc::ConfigMismatch, meta.string() + ": " + e.what());
    }
    store.problems_ = load_suite(root / "suite.jsonl");

    std::set<std::string> listed;
    for (const auto& id : doc.at("problems")) listed.insert(id.get<std::string>());
    std::set<std::string> loaded;
    for (const auto& p : store.problems_) loaded.insert(p.id);
    if (listed != loaded)
      throw Error(Errc::ConfigMismatch, root.string() + ": suite.jsonl disagrees with campaign.json");
    if (fs::is_directory(root / "problems")) {
      for (const auto& entry : fs::directory_iterator(root / "problems"))
        if (!listed.count(entry.path().filename().string()))
          throw Error(Errc::ConfigMismatch,
                      "unexpected problem directory " + entry.path().string());
    }
    return store;
  }

  const fs::path& root() const { return root_; }
  const CampaignConfig& config() const { return config_; }
  const std::vector<Problem>& problems() const { return problems_; }

  fs::path problem_dir(const std::string& id) const { return root_ / "problems" / id; }
  fs::path failed_dir(const std::string& id, int index) const {
    return problem_dir(id) / "failed" / std::to_string(index);
  }

  void append(const Sample& s) const {
    detail::append_line(problem_dir(s.problem_id) / "samples.jsonl", to_json(s).dump());
  }
  void append_overshoot(const Sample& s) const {
    detail::append_line(problem_dir(s.problem_id) / "overshoot.jsonl", to_json(s).dump());
  }

  std::vector<Sample> load_samples(const std::string& id) const {
    std::vector<Sample> out;
    const fs::path file = problem_dir(id) / "samples.jsonl";
    for (const auto& line : detail::read_complete_lines(file)) {
      Sample s;
      try {
        s = sample_from_json(json::parse(line));
      } catch (const json::exception& e) {
        throw Error(Errc::Io, file.string() + ": corrupt record: " + e.what());
      }
      if (s.index != static_cast<int>(out.size()) + 1 || s.problem_id != id)
        throw Error(Errc::Io, file.string() + ": records out of sequence");
      out.push_back(std::move(s));
    }
    return out;
  }

  // Drops a trailing partial line left by an interrupted append.
  void repair() const {
    for (const auto& p : problems_) {
      for (const char* name : {"samples.jsonl", "overshoot.jsonl"}) {
        const fs::path file = problem_dir(p.id) / name;
        if (!fs::exists(file)) continue;
        std::size_t complete = 0;
        detail::read_complete_lines(file, &complete);
        if (complete != fs::file_size(file)) fs::resize_file(file, complete);
      }
    }
  }

  StoreSnapshot snapshot() const {
    StoreSnapshot snap;
    snap.config = config_;
    snap.problems = problems_;
    for (const auto& p : problems_) {
      snap.samples[p.id] = load_samples(p.id);
      UsageRecord extra;
      for (const auto& line : detail::read_complete_lines(problem_dir(p.id) / "overshoot.jsonl")) {
        try {
          extra += sample_from_json(json::parse(line)).usage;
        } catch (const std::exception&) {
          // overshoot records only feed cost totals; skip unreadable ones
        }
      }
      snap.overshoot_usage[p.id] = extra;
    }
    return snap;
  }

 private:
  CampaignStore() = default;

  fs::path root_;
  CampaignConfig config_;
  std::vector<Problem> problems_;
};

}  // namespace hdlscale
