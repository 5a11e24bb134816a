#include "orepanel/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace orepanel::csv {

int Table::col(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

int Table::require_col(const std::string& name) const {
  int c = col(name);
  if (c < 0) throw std::runtime_error("missing CSV column: " + name);
  return c;
}

static std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

Table parse(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (first) {
      t.header = std::move(fields);
      first = false;
    } else {
      if (fields.size() != t.header.size())
        throw std::runtime_error("CSV row width mismatch (expected " +
                                 std::to_string(t.header.size()) + ", got " +
                                 std::to_string(fields.size()) + ")");
      t.rows.push_back(std::move(fields));
    }
  }
  return t;
}

Table read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open CSV file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

struct Writer::Impl {
  std::ofstream out;
  size_t ncols = 0;
  std::string path;
};

Writer::Writer(const std::string& path) : impl_(new Impl) {
  impl_->path = path;
  impl_->out.open(path, std::ios::binary);
  if (!impl_->out) {
    delete impl_;
    throw std::runtime_error("cannot open for writing: " + path);
  }
}

Writer::~Writer() { delete impl_; }

static void write_fields(std::ofstream& out, const std::vector<std::string>& f) {
  for (size_t i = 0; i < f.size(); ++i) {
    if (i) out << ',';
    out << f[i];
  }
  out << '\n';
}

void Writer::header(const std::vector<std::string>& cols) {
  impl_->ncols = cols.size();
  write_fields(impl_->out, cols);
}

void Writer::row(const std::vector<std::string>& fields) {
  if (impl_->ncols && fields.size() != impl_->ncols)
    throw std::runtime_error("CSV writer: row width mismatch in " + impl_->path);
  write_fields(impl_->out, fields);
}

void Writer::close() { impl_->out.close(); }

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string fmt(long v) { return std::to_string(v); }
std::string fmt(int v) { return std::to_string(v); }

}  // namespace orepanel::csv
