#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace orepanel::csv {

// Minimal CSV: comma-separated, no quoting (none of our fields contain commas).
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const;        // -1 if absent
  int require_col(const std::string& name) const; // throws if absent
};

Table read_file(const std::string& path);
Table parse(const std::string& text);

class Writer {
 public:
  explicit Writer(const std::string& path);
  ~Writer();
  Writer(const Writer&) = delete;
  Writer& operator=(const Writer&) = delete;

  void header(const std::vector<std::string>& cols);
  void row(const std::vector<std::string>& fields);
  void close();

 private:
  struct Impl;
  Impl* impl_;
};

// Fixed formatting so repeated runs emit identical bytes.
std::string fmt(double v);
std::string fmt(long v);
std::string fmt(int v);

}  // namespace orepanel::csv
