#pragma once

#include <stdexcept>
#include <string>

namespace defamekit {

// Malformed document. `line`/`column` are 1-based; 0 when unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line = 0, int column = 0)
      : std::runtime_error(what), line_(line), column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

// Required field missing or of the wrong type.
class FieldError : public std::runtime_error {
 public:
  FieldError(std::string path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class RenderError : public std::runtime_error {
 public:
  explicit RenderError(std::string placeholder)
      : std::runtime_error("unresolved placeholder {" + placeholder + "}"),
        placeholder_(std::move(placeholder)) {}
  const std::string& placeholder() const { return placeholder_; }

 private:
  std::string placeholder_;
};

// Failure while executing a DAG; names the node that failed.
class DagExecutionError : public std::runtime_error {
 public:
  DagExecutionError(std::string node, const std::string& what)
      : std::runtime_error("node '" + node + "': " + what), node_(std::move(node)) {}
  const std::string& node() const { return node_; }

 private:
  std::string node_;
};

class DistinctnessError : public std::runtime_error {
 public:
  DistinctnessError(std::size_t achieved, std::size_t requested)
      : std::runtime_error("could only produce " + std::to_string(achieved) + " of " +
                           std::to_string(requested) + " distinct inputs"),
        achieved_(achieved) {}
  std::size_t achieved() const { return achieved_; }

 private:
  std::size_t achieved_;
};

class DatasetError : public std::runtime_error {
 public:
  DatasetError(std::size_t index, const std::string& what)
      : std::runtime_error("record " + std::to_string(index) + ": " + what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class TeacherError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class BackendError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class JudgeError : public std::runtime_error {
 public:
  JudgeError(std::string criterion, const std::string& what)
      : std::runtime_error("criterion '" + criterion + "': " + what),
        criterion_(std::move(criterion)) {}
  const std::string& criterion() const { return criterion_; }

 private:
  std::string criterion_;
};

class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Statistic undefined for the given input (e.g. b + c = 0 for McNemar).
class UndefinedStatistic : public std::domain_error {
  using std::domain_error::domain_error;
};

// A file could not be read or written.
class IoError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class IllegalAction : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace defamekit
