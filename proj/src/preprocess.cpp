#include "driftmon/preprocess.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "driftmon/error.hpp"

namespace driftmon {

namespace fs = std::filesystem;

namespace {

// Next header token of a PGM, skipping whitespace and # comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

std::size_t parse_count(const std::string& tok, const fs::path& path) {
  std::size_t pos = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(tok, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (tok.empty() || pos != tok.size()) throw FormatError(path.string() + ": bad PGM header field '" + tok + "'");
  return v;
}

std::string ts_string(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", t);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void IntensityRange::validate() const {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
    throw PreconditionError("intensity range needs finite lo < hi");
}

IntensityRange parse_intensity_range(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw PreconditionError("intensity range must be 'lo,hi'");
  IntensityRange r;
  try {
    r.lo = std::stod(text.substr(0, comma));
    r.hi = std::stod(text.substr(comma + 1));
  } catch (const std::exception&) {
    throw PreconditionError("intensity range must be 'lo,hi'");
  }
  r.validate();
  return r;
}

ImageFrame read_pgm(const fs::path& path, double time, IntensityRange range) {
  range.validate();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  if (pgm_token(in) != "P5") throw FormatError(path.string() + ": not a binary PGM (P5)");
  const std::size_t w = parse_count(pgm_token(in), path);
  const std::size_t h = parse_count(pgm_token(in), path);
  const std::size_t maxval = parse_count(pgm_token(in), path);
  if (maxval < 1 || maxval > 65535) throw FormatError(path.string() + ": maxval out of range");
  if (w < 2 || h < 2) throw FormatError(path.string() + ": image smaller than 2x2");
  const std::size_t bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(w * h * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw FormatError(path.string() + ": truncated pixel data");
  std::vector<double> values(w * h);
  const double span = range.hi - range.lo;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t v = bytes == 2 ? (std::size_t{raw[2 * i]} << 8) | raw[2 * i + 1] : raw[i];
    if (v > maxval) throw FormatError(path.string() + ": sample exceeds maxval");
    values[i] = range.lo + span * (static_cast<double>(v) / static_cast<double>(maxval));
  }
  return ImageFrame(Dims{w, h}, time, std::move(values));
}

void write_pgm(const fs::path& path, const ImageFrame& frame, int bit_depth, IntensityRange range) {
  range.validate();
  if (bit_depth != 8 && bit_depth != 16) throw PreconditionError("bit depth must be 8 or 16");
  const unsigned maxval = bit_depth == 8 ? 255u : 65535u;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "P5\n" << frame.nx() << ' ' << frame.ny() << '\n' << maxval << '\n';
  std::vector<unsigned char> raw;
  raw.reserve(frame.size() * (bit_depth / 8));
  for (double v : frame.values()) {
    const double u = std::clamp((v - range.lo) / (range.hi - range.lo), 0.0, 1.0);
    const auto q = static_cast<unsigned>(std::floor(u * maxval + 0.5));
    if (bit_depth == 16) raw.push_back(static_cast<unsigned char>(q >> 8));
    raw.push_back(static_cast<unsigned char>(q & 0xFF));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw FormatError("failed writing " + path.string());
}

ImageSequence load_sequence(const fs::path& manifest, IntensityRange range) {
  std::ifstream in(manifest);
  if (!in) throw FormatError("cannot open manifest " + manifest.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "filename,time")
    throw FormatError(manifest.string() + ": header must be 'filename,time'");
  std::vector<std::pair<double, std::string>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw FormatError(manifest.string() + ":" + std::to_string(lineno) + ": missing time");
    double t = 0.0;
    std::size_t pos = 0;
    const std::string ts = trim(line.substr(comma + 1));
    try {
      t = std::stod(ts, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (ts.empty() || pos != ts.size() || !std::isfinite(t))
      throw FormatError(manifest.string() + ":" + std::to_string(lineno) + ": bad time '" + ts + "'");
    rows.emplace_back(t, trim(line.substr(0, comma)));
  }
  if (rows.empty()) throw FormatError(manifest.string() + ": no frames listed");
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].first == rows[i - 1].first) throw FormatError(manifest.string() + ": duplicate time " + ts_string(rows[i].first));
  const fs::path base = manifest.parent_path();
  ImageSequence seq;
  for (const auto& [t, name] : rows) {
    ImageFrame f = read_pgm(base / name, t, range);
    if (!seq.empty() && f.dims() != seq.dims()) throw FormatError(name + ": resolution differs from earlier frames");
    seq.push_back(std::move(f));
  }
  return seq;
}

fs::path save_sequence(const ImageSequence& seq, const fs::path& dir, int bit_depth, IntensityRange range) {
  fs::create_directories(dir);
  const fs::path manifest = dir / "manifest.csv";
  std::ofstream out(manifest, std::ios::binary);
  if (!out) throw FormatError("cannot write " + manifest.string());
  out << "filename,time\n";
  char name[64];
  for (std::size_t k = 0; k < seq.size(); ++k) {
    std::snprintf(name, sizeof name, "frame_%04zu.pgm", k + 1);
    write_pgm(dir / name, seq[k], bit_depth, range);
    out << name << ',' << ts_string(seq[k].time()) << '\n';
  }
  if (!out) throw FormatError("failed writing " + manifest.string());
  return manifest;
}

ImageFrame resize_frame(const ImageFrame& frame, std::size_t new_n) {
  if (new_n < 2) throw PreconditionError("new size must be at least 2");
  const std::size_t nx = frame.nx();
  const std::size_t ny = frame.ny();
  // Source coordinate (0-based, continuous) of each output pixel center.
  auto source = [new_n](std::size_t i, std::size_t n) {
    const double u = (static_cast<double>(i) + 0.5) * static_cast<double>(n) / static_cast<double>(new_n) - 0.5;
    return std::clamp(u, 0.0, static_cast<double>(n - 1));
  };
  std::vector<double> out(new_n * new_n);
  for (std::size_t r = 0; r < new_n; ++r) {
    const double v = source(r, ny);
    const auto r0 = static_cast<std::size_t>(std::floor(v));
    const std::size_t r1 = std::min(r0 + 1, ny - 1);
    const double fy = v - static_cast<double>(r0);
    for (std::size_t c = 0; c < new_n; ++c) {
      const double u = source(c, nx);
      const auto c0 = static_cast<std::size_t>(std::floor(u));
      const std::size_t c1 = std::min(c0 + 1, nx - 1);
      const double fx = u - static_cast<double>(c0);
      const double top = frame.at(c0, r0) + fx * (frame.at(c1, r0) - frame.at(c0, r0));
      const double bot = frame.at(c0, r1) + fx * (frame.at(c1, r1) - frame.at(c0, r1));
      out[r * new_n + c] = top + fy * (bot - top);
    }
  }
  return ImageFrame(Dims{new_n, new_n}, frame.time(), std::move(out));
}

ImageSequence impute_missing(const ImageSequence& seq, std::span<const double> target_times) {
  if (seq.empty()) throw PreconditionError("cannot impute from an empty sequence");
  const std::vector<double> times = seq.times();
  ImageSequence out;
  for (double t : target_times) {
    if (!(t >= times.front() && t <= times.back()))
      throw PreconditionError("imputation time " + ts_string(t) + " lies outside the observed span");
    const auto hi = std::lower_bound(times.begin(), times.end(), t);
    const auto i1 = static_cast<std::size_t>(hi - times.begin());
    if (times[i1] == t) {
      out.push_back(seq[i1]);
      continue;
    }
    const std::size_t i0 = i1 - 1;
    const double t0 = times[i0];
    const double t1 = times[i1];
    auto a = seq[i0].values();
    auto b = seq[i1].values();
    std::vector<double> v(a.size());
    for (std::size_t p = 0; p < v.size(); ++p) v[p] = (a[p] * (t1 - t) + b[p] * (t - t0)) / (t1 - t0);
    out.push_back(ImageFrame(seq.dims(), t, std::move(v)));
  }
  return out;
}

ImageSequence scale_intensities(const ImageSequence& seq) {
  if (seq.empty()) throw PreconditionError("cannot scale an empty sequence");
  double lo = seq[0].values()[0];
  double hi = lo;
  for (const auto& f : seq)
    for (double v : f.values()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (!(hi > lo)) throw PreconditionError("sequence has a constant intensity range");
  ImageSequence out;
  for (const auto& f : seq) {
    std::vector<double> v(f.values().begin(), f.values().end());
    for (double& x : v) x = (x - lo) / (hi - lo);
    out.push_back(ImageFrame(f.dims(), f.time(), std::move(v)));
  }
  return out;
}

}  // namespace driftmon
