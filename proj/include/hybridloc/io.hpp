#pragma once

#include "errors.hpp"
#include "eval.hpp"
#include "gait.hpp"
#include "geomodel.hpp"
#include "sim.hpp"

#include <charconv>
#include <fstream>
#include <iosfwd>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

// CSV measurement logs, tracks and reports. Doubles are written in shortest
// round-trip form so a replayed log is bit-identical to the in-memory one.
namespace hybridloc::io
{

inline std::string fmt(double v)
{
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace detail
{

inline std::vector<std::string_view> split(std::string_view line)
{
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true)
  {
    const std::size_t comma = line.find(',', pos);
    std::string_view f = line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t'))
      f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r'))
      f.remove_suffix(1);
    out.push_back(f);
    if (comma == std::string_view::npos)
      break;
    pos = comma + 1;
  }
  return out;
}

// Reads a CSV with a fixed header; calls row(fields, line_no) per data line.
template <class RowFn>
void read_csv(std::istream& in, const std::string& name, const std::vector<std::string_view>& header, RowFn&& row)
{
  std::string line;
  std::size_t line_no = 0;
  bool seen_header = false;
  while (std::getline(in, line))
  {
    ++line_no;
    if (line.empty() || line == "\r" || line.front() == '#')
      continue;
    const auto fields = split(line);
    if (!seen_header)
    {
      if (fields != header)
      {
        std::string expected;
        for (auto h : header)
          expected += (expected.empty() ? "" : ",") + std::string(h);
        throw SchemaError(name, line_no, "expected header '" + expected + "'");
      }
      seen_header = true;
      continue;
    }
    if (fields.size() != header.size())
      throw SchemaError(name, line_no,
                        "expected " + std::to_string(header.size()) + " columns, got " + std::to_string(fields.size()));
    row(fields, line_no);
  }
  if (!seen_header)
    throw SchemaError(name, line_no, "missing header");
}

inline double to_double(std::string_view f, const std::string& name, std::size_t line)
{
  double v = 0.0;
  const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
  if (res.ec != std::errc() || res.ptr != f.data() + f.size() || !std::isfinite(v))
    throw SchemaError(name, line, "not a finite number: '" + std::string(f) + "'");
  return v;
}

inline long long to_int(std::string_view f, const std::string& name, std::size_t line)
{
  long long v = 0;
  const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
  if (res.ec != std::errc() || res.ptr != f.data() + f.size())
    throw SchemaError(name, line, "not an integer: '" + std::string(f) + "'");
  return v;
}

inline std::ifstream open_in(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw SchemaError(path, 0, "cannot open file");
  return in;
}

inline std::ofstream open_out(const std::string& path)
{
  std::ofstream out(path);
  if (!out)
    throw Error("cannot write " + path);
  return out;
}

} // namespace detail

// --- epochs: t,pair_i,pair_j,tdoa_m -----------------------------------------

inline void write_epochs(std::ostream& out, std::span<const TdoaSet> epochs)
{
  out << "t,pair_i,pair_j,tdoa_m\n";
  for (const auto& e : epochs)
    for (const auto& m : e.entries)
      out << fmt(e.epoch) << ',' << m.pair.anchor_i << ',' << m.pair.anchor_j << ',' << fmt(m.value) << '\n';
}

// Consecutive rows sharing a timestamp form one epoch; sigma is left at 0
// for the caller to fill from configuration.
inline std::vector<TdoaSet> read_epochs(std::istream& in, const std::string& name = "epochs.csv")
{
  std::vector<TdoaSet> out;
  detail::read_csv(in, name, {"t", "pair_i", "pair_j", "tdoa_m"}, [&](const auto& f, std::size_t line) {
    const double t = detail::to_double(f[0], name, line);
    const auto i = static_cast<int>(detail::to_int(f[1], name, line));
    const auto j = static_cast<int>(detail::to_int(f[2], name, line));
    const double v = detail::to_double(f[3], name, line);
    if (i == j)
      throw SchemaError(name, line, "pair uses the same anchor twice");
    if (out.empty() || out.back().epoch != t)
    {
      if (!out.empty() && t < out.back().epoch)
        throw SchemaError(name, line, "epoch timestamps must be non-decreasing");
      out.push_back(TdoaSet{t, {}});
    }
    out.back().entries.push_back({{i, j}, v, 0.0});
  });
  return out;
}

// --- accel: t,ax,ay,az --------------------------------------------------------

inline void write_accel(std::ostream& out, std::span<const AccelSample> samples)
{
  out << "t,ax,ay,az\n";
  for (const auto& s : samples)
    out << fmt(s.t) << ',' << fmt(s.ax) << ',' << fmt(s.ay) << ',' << fmt(s.az) << '\n';
}

inline std::vector<AccelSample> read_accel(std::istream& in, const std::string& name = "accel.csv")
{
  std::vector<AccelSample> out;
  detail::read_csv(in, name, {"t", "ax", "ay", "az"}, [&](const auto& f, std::size_t line) {
    AccelSample s{detail::to_double(f[0], name, line), detail::to_double(f[1], name, line),
                  detail::to_double(f[2], name, line), detail::to_double(f[3], name, line)};
    if (!out.empty() && !(s.t > out.back().t))
      throw SchemaError(name, line, "timestamps must be strictly increasing");
    out.push_back(s);
  });
  return out;
}

// --- truth: t,x,y,vx,vy,stopped ----------------------------------------------

inline void write_truth(std::ostream& out, std::span<const TruthPoint> truth)
{
  out << "t,x,y,vx,vy,stopped\n";
  for (const auto& p : truth)
    out << fmt(p.t) << ',' << fmt(p.pos.x()) << ',' << fmt(p.pos.y()) << ',' << fmt(p.vel.x()) << ','
        << fmt(p.vel.y()) << ',' << (p.stopped ? 1 : 0) << '\n';
}

// Facing is not part of the file; it is recovered from the velocity where
// the person is walking.
inline std::vector<TruthPoint> read_truth(std::istream& in, const std::string& name = "truth.csv")
{
  std::vector<TruthPoint> out;
  detail::read_csv(in, name, {"t", "x", "y", "vx", "vy", "stopped"}, [&](const auto& f, std::size_t line) {
    TruthPoint p;
    p.t = detail::to_double(f[0], name, line);
    p.pos = {detail::to_double(f[1], name, line), detail::to_double(f[2], name, line)};
    p.vel = {detail::to_double(f[3], name, line), detail::to_double(f[4], name, line)};
    const auto stopped = detail::to_int(f[5], name, line);
    if (stopped != 0 && stopped != 1)
      throw SchemaError(name, line, "stopped must be 0 or 1");
    p.stopped = stopped == 1;
    p.facing = p.vel.norm() > 0.0 ? bearing_from_y(p.vel) : (out.empty() ? 0.0 : out.back().facing);
    if (!out.empty() && !(p.t > out.back().t))
      throw SchemaError(name, line, "timestamps must be strictly increasing");
    out.push_back(p);
  });
  return out;
}

// --- tracks: t,x,y,flags -------------------------------------------------------

inline std::string flags_to_string(std::uint32_t flags)
{
  std::string s;
  auto add = [&](std::uint32_t bit, const char* name) {
    if (flags & bit)
      s += (s.empty() ? "" : "|") + std::string(name);
  };
  add(kFlagGated, "gated");
  add(kFlagColdStart, "cold_start");
  add(kFlagFallback, "fallback");
  return s.empty() ? "-" : s;
}

inline std::uint32_t flags_from_string(std::string_view s, const std::string& name, std::size_t line)
{
  std::uint32_t flags = kFlagNone;
  if (s == "-")
    return flags;
  std::size_t pos = 0;
  while (pos <= s.size())
  {
    const std::size_t bar = std::min(s.find('|', pos), s.size());
    const auto tok = s.substr(pos, bar - pos);
    if (tok == "gated")
      flags |= kFlagGated;
    else if (tok == "cold_start")
      flags |= kFlagColdStart;
    else if (tok == "fallback")
      flags |= kFlagFallback;
    else
      throw SchemaError(name, line, "unknown flag '" + std::string(tok) + "'");
    pos = bar + 1;
  }
  return flags;
}

inline void write_track(std::ostream& out, const Track& track)
{
  out << "t,x,y,flags\n";
  for (const auto& f : track.fixes)
    out << fmt(f.t) << ',' << fmt(f.pos.x()) << ',' << fmt(f.pos.y()) << ',' << flags_to_string(f.flags) << '\n';
}

inline Track read_track(std::istream& in, std::string estimator, const std::string& name = "track.csv")
{
  Track tr;
  tr.estimator = std::move(estimator);
  detail::read_csv(in, name, {"t", "x", "y", "flags"}, [&](const auto& f, std::size_t line) {
    tr.fixes.push_back({detail::to_double(f[0], name, line),
                        {detail::to_double(f[1], name, line), detail::to_double(f[2], name, line)},
                        flags_from_string(f[3], name, line)});
  });
  return tr;
}

// --- steps: t_start,t_end,peak ---------------------------------------------------

inline void write_steps(std::ostream& out, std::span<const StepEvent> steps)
{
  out << "t_start,t_end,peak\n";
  for (const auto& s : steps)
    out << fmt(s.t_start) << ',' << fmt(s.t_end) << ',' << fmt(s.peak_value) << '\n';
}

// --- reports --------------------------------------------------------------------

inline void write_report(std::ostream& out, const ErrorReport& rep)
{
  out << "# percentiles use the lower convention: sorted[floor(q*(n-1))]\n";
  out << "statistic,error_m\n";
  out << "p50," << fmt(rep.p50) << '\n';
  out << "p90," << fmt(rep.p90) << '\n';
  out << "max," << fmt(rep.max_error) << '\n';
  out << "mean," << fmt(rep.mean) << '\n';
  out << "count," << rep.errors.size() << '\n';
}

inline void write_cdf(std::ostream& out, const ErrorReport& rep)
{
  out << "error,fraction\n";
  for (const auto& p : rep.cdf)
    out << fmt(p.error) << ',' << fmt(p.fraction) << '\n';
}

// File-path conveniences.
template <class T, class Fn>
void save(const std::string& path, const T& value, Fn&& writer)
{
  auto out = detail::open_out(path);
  writer(out, value);
}

inline std::vector<TdoaSet> load_epochs(const std::string& path)
{
  auto in = detail::open_in(path);
  return read_epochs(in, path);
}

inline std::vector<AccelSample> load_accel(const std::string& path)
{
  auto in = detail::open_in(path);
  return read_accel(in, path);
}

inline std::vector<TruthPoint> load_truth(const std::string& path)
{
  auto in = detail::open_in(path);
  return read_truth(in, path);
}

inline Track load_track(const std::string& path, std::string estimator)
{
  auto in = detail::open_in(path);
  return read_track(in, std::move(estimator), path);
}

} // namespace hybridloc::io
