#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hdlscale/core/error.hpp"
#include "hdlscale/core/json_io.hpp"
#include "hdlscale/core/types.hpp"

namespace hdlscale {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

inline void check_problem_id(const std::string& id, const std::string& where) {
  if (id.empty() || id == "." || id == ".." || id.find_first_of("/\\") != std::string::npos ||
      id.find('\0') != std::string::npos)
    throw Error(Errc::InvalidSuite, "invalid problem id '" + id + "' (" + where + ")");
}

// Problems must be self-contained: no declared external module dependencies.
inline void check_self_contained(const json& meta, const std::string& where) {
  for (const char* key : {"dependencies", "external_modules"}) {
    auto it = meta.find(key);
    if (it != meta.end() && !it->is_null() && !it->empty())
      throw Error(Errc::ExternalDependency, where + " declares external module dependencies");
  }
}

inline void apply_meta(Problem& p, const json& meta) {
  if (auto it = meta.find("tags"); it != meta.end() && !it->is_null())
    p.tags = it->get<std::set<std::string>>();
  if (auto r = get_opt_string(meta, "pass_regex")) p.pass_regex = r;
  if (auto r = get_opt_string(meta, "fail_regex")) p.fail_regex = r;
}

inline std::vector<Problem> finish_suite(std::vector<std::pair<Problem, std::string>> loaded) {
  std::map<std::string, std::string> seen;
  for (const auto& [p, where] : loaded) {
    check_problem_id(p.id, where);
    auto [it, inserted] = seen.emplace(p.id, where);
    if (!inserted)
      throw Error(Errc::DuplicateId, p.id + " (" + it->second + " and " + where + ")");
  }
  std::vector<Problem> out;
  out.reserve(loaded.size());
  for (auto& [p, where] : loaded) out.push_back(std::move(p));
  std::sort(out.begin(), out.end(), [](const Problem& a, const Problem& b) { return a.id < b.id; });
  return out;
}

inline std::vector<Problem> load_suite_dir(const fs::path& dir) {
  const std::string suite_name = dir.filename().empty() ? dir.parent_path().filename().string()
                                                        : dir.filename().string();
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_directory()) continue;
    if (entry.path().filename().string().starts_with(".")) continue;
    dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());

  std::vector<std::pair<Problem, std::string>> loaded;
  for (const auto& pdir : dirs) {
    const std::string where = pdir.string();
    Problem p;
    p.id = pdir.filename().string();
    p.suite = suite_name;
    json meta = json::object();
    if (fs::exists(pdir / "meta.json")) {
      try {
        meta = json::parse(read_file(pdir / "meta.json"));
      } catch (const json::exception& e) {
        throw Error(Errc::InvalidSuite, where + "/meta.json: " + e.what());
      }
      if (auto id = get_opt_string(meta, "id")) p.id = *id;
      check_self_contained(meta, where);
      apply_meta(p, meta);
    }
    if (!fs::exists(pdir / "spec.md")) throw Error(Errc::MissingSpec, where);
    p.spec_text = read_file(pdir / "spec.md");
    if (p.spec_text.empty()) throw Error(Errc::MissingSpec, where + " (empty spec.md)");
    if (!fs::exists(pdir / "testbench.v")) throw Error(Errc::MissingTestbench, where);
    p.testbench_source = read_file(pdir / "testbench.v");
    if (p.testbench_source.empty())
      throw Error(Errc::MissingTestbench, where + " (empty testbench.v)");
    if (fs::exists(pdir / "ref.v")) p.ref_code = read_file(pdir / "ref.v");
    loaded.emplace_back(std::move(p), where);
  }
  return finish_suite(std::move(loaded));
}

inline std::vector<Problem> load_suite_jsonl(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + file.string());
  std::vector<std::pair<Problem, std::string>> loaded;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = file.string() + ":" + std::to_string(lineno);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(Errc::InvalidSuite, where + ": " + e.what());
    }
    check_self_contained(rec, where);
    Problem p = problem_from_json(rec);
    if (p.suite.empty()) p.suite = file.stem().string();
    if (p.spec_text.empty()) throw Error(Errc::MissingSpec, where + " (" + p.id + ")");
    if (p.testbench_source.empty()) throw Error(Errc::MissingTestbench, where + " (" + p.id + ")");
    loaded.emplace_back(std::move(p), where);
  }
  return finish_suite(std::move(loaded));
}

}  // namespace detail

// Loads a suite from a directory (one subdirectory per problem) or a JSONL
// file. Result is sorted by id.
inline std::vector<Problem> load_suite(const fs::path& path) {
  if (fs::is_directory(path)) return detail::load_suite_dir(path);
  if (fs::is_regular_file(path)) return detail::load_suite_jsonl(path);
  throw Error(Errc::InvalidSuite, "suite path not found: " + path.string());
}

inline void save_suite_jsonl(const std::vector<Problem>& problems, const fs::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + file.string());
  for (const auto& p : problems) out << to_json(p).dump() << '\n';
  if (!out) throw Error(Errc::Io, "write failed: " + file.string());
}

}  // namespace hdlscale
