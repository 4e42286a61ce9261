#include "nwos/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>
#include <vector>

namespace nwos {

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("failed to format a double");
  return std::string(buf, ptr);
}

namespace {

std::ofstream open_for_write(const std::string& path) {
  std::ofstream os(path, std::ios::binary);  // binary: no newline translation
  if (!os) throw std::runtime_error("cannot write " + path);
  return os;
}

void finish_write(std::ofstream& os, const std::string& path) {
  os.flush();
  if (!os) throw std::runtime_error("failed while writing " + path);
}

}  // namespace

void write_convergence_csv(const std::string& path, const ConvergenceLog& log) {
  std::ofstream os = open_for_write(path);
  os << "iteration,seconds,loss,rel_l2\n";
  for (const LogEntry& e : log.entries)
    os << e.iteration << ",0," << format_double(e.loss) << ',' << format_double(e.rel_l2)
       << '\n';
  finish_write(os, path);
}

PointBatch read_points_csv(const std::string& path, int expected_dim) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  long line_no = 0;
  int dim = expected_dim;
  while (std::getline(is, line)) {
    ++line_no;
    std::string_view sv(line);
    if (!sv.empty() && sv.back() == '\r') sv.remove_suffix(1);
    while (!sv.empty() && (sv.front() == ' ' || sv.front() == '\t')) sv.remove_prefix(1);
    if (sv.empty() || sv.front() == '#') continue;
    std::vector<double> row;
    const char* p = sv.data();
    const char* end = sv.data() + sv.size();
    while (true) {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc())
        throw std::runtime_error(path + " line " + std::to_string(line_no) +
                                 ": expected a number");
      row.push_back(v);
      p = next;
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      if (p == end) break;
      if (*p != ',')
        throw std::runtime_error(path + " line " + std::to_string(line_no) +
                                 ": expected a comma");
      ++p;
    }
    if (dim < 0) dim = (int)row.size();
    if ((int)row.size() != dim)
      throw std::runtime_error(path + " line " + std::to_string(line_no) + ": expected " +
                               std::to_string(dim) + " coordinates, got " +
                               std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error(path + ": no points found");
  PointBatch out((long)rows.size(), dim);
  for (long i = 0; i < out.rows(); ++i)
    for (int j = 0; j < dim; ++j) out(i, j) = rows[(std::size_t)i][(std::size_t)j];
  return out;
}

void write_estimates_csv(const std::string& path, const PointBatch& points,
                         const PointwiseEstimate& est) {
  if (points.rows() != est.values.size())
    throw std::invalid_argument("estimates do not match the points");
  std::ofstream os = open_for_write(path);
  for (int j = 0; j < points.cols(); ++j) os << 'x' << (j + 1) << ',';
  os << "estimate,stderr,mean_steps\n";
  for (long i = 0; i < points.rows(); ++i) {
    for (int j = 0; j < points.cols(); ++j) os << format_double(points(i, j)) << ',';
    os << format_double(est.values[i]) << ',' << format_double(est.stderrs[i]) << ','
       << format_double(est.steps_per_point[i]) << '\n';
  }
  finish_write(os, path);
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t config_hash(const std::map<std::string, std::string>& fields) {
  std::string joined;
  for (const auto& [k, v] : fields) {
    joined += k;
    joined += '=';
    joined += v;
    joined += '\n';
  }
  return fnv1a64(joined);
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[(std::size_t)i] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

}  // namespace nwos
