#ifndef DETMAC_CLI_H
#define DETMAC_CLI_H

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace detmac {

enum ExitCode : int { kExitOk = 0, kExitViolation = 1, kExitInputError = 2 };

enum class OutputFormat { Table, JsonLines };

using Cell = std::variant<std::int64_t, double, std::string, bool>;

/// One machine-readable table. Written as CSV with a header row, or as one
/// JSON object per row with a "table" field naming it.
struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows = {};

    void add(std::vector<Cell> row) { rows.push_back(std::move(row)); }
};

std::string csv_field(const Cell& cell);
void write_csv(std::ostream& out, const Table& table);
void write_json_lines(std::ostream& out, const Table& table);

/// Where the tables of a command go: files in a directory when one is given,
/// else standard output.
class Output {
public:
    Output(OutputFormat format, std::optional<std::filesystem::path> dir, std::ostream& out, std::ostream& err);

    OutputFormat format() const { return format_; }
    void table(const Table& table);
    /// Human-readable lines: summary.txt in the output directory (also echoed
    /// to err), else err alone so standard output stays machine-readable.
    void summary(const std::vector<std::string>& lines);

private:
    OutputFormat format_;
    std::optional<std::filesystem::path> dir_;
    std::ostream& out_;
    std::ostream& err_;
    bool first_ = true;
};

enum class LogLevel { Off, Info, Trace };

/// DETMAC_LOG: unset, "0" or "off" is silent; "info" reports progress; "trace" or "1" also streams simulation events.
LogLevel log_level_from_env();

/// Entry point of the detmac tool. argv[0] is the program name.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace detmac

#endif  // DETMAC_CLI_H
