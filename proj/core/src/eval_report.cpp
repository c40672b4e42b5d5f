#include "scripta/eval_report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "csv.hpp"
#include "scripta/error.hpp"

namespace scripta {

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> classes)
    : class_list(std::move(classes)), counts(class_list.size() * class_list.size(), 0) {}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::uint64_t s = 0;
  for (std::size_t j = 0; j < n_classes(); ++j) s += at(truth, j);
  return s;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (auto c : counts) s += c;
  return s;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < n_classes(); ++i) s += at(i, i);
  return s;
}

ConfusionMatrix confusion(std::span<const std::uint32_t> truth, std::span<const std::uint32_t> predicted,
                          std::vector<std::string> class_list) {
  if (truth.size() != predicted.size()) {
    throw ArgumentError("confusion: " + std::to_string(truth.size()) + " true labels but " +
                        std::to_string(predicted.size()) + " predictions");
  }
  ConfusionMatrix cm(std::move(class_list));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= cm.n_classes() || predicted[i] >= cm.n_classes()) {
      throw ArgumentError("confusion: label outside class list at sample " + std::to_string(i));
    }
    ++cm.at(truth[i], predicted[i]);
  }
  return cm;
}

std::vector<std::size_t> EvalReport::empty_classes() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < per_class.size(); ++i) {
    if (!per_class[i]) out.push_back(i);
  }
  return out;
}

EvalReport summarize(const ConfusionMatrix& cm) {
  if (cm.n_classes() == 0) throw ArgumentError("summarize: empty confusion matrix");
  if (cm.total() == 0) throw ArgumentError("summarize: every class row is empty");
  EvalReport r;
  r.matrix = cm;
  r.per_class.resize(cm.n_classes());
  double sum = 0.0;
  std::size_t defined = 0;
  for (std::size_t i = 0; i < cm.n_classes(); ++i) {
    const auto n = cm.row_sum(i);
    if (n == 0) continue;
    r.per_class[i] = static_cast<double>(cm.at(i, i)) / static_cast<double>(n);
    sum += *r.per_class[i];
    ++defined;
  }
  r.average = sum / static_cast<double>(defined);
  r.overall = static_cast<double>(cm.trace()) / static_cast<double>(cm.total());
  return r;
}

EvalReport aggregate_folds(std::span<const EvalReport> reports) {
  if (reports.empty()) throw ArgumentError("aggregate_folds: no reports");
  ConfusionMatrix pooled(reports.front().matrix.class_list);
  for (const auto& r : reports) {
    if (r.matrix.class_list != pooled.class_list) throw ConfigError("aggregate_folds: fold class lists differ");
    for (std::size_t i = 0; i < pooled.counts.size(); ++i) pooled.counts[i] += r.matrix.counts[i];
  }
  EvalReport out = summarize(pooled);
  out.folds.assign(reports.begin(), reports.end());
  return out;
}

std::string format_fixed(double value, int precision) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed, precision);
  return std::string(buf, res.ptr);
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string confusion_csv(const ConfusionMatrix& cm) {
  std::string out = "true\\predicted";
  for (const auto& c : cm.class_list) out += "," + csv::quote(c);
  out += "\n";
  for (std::size_t i = 0; i < cm.n_classes(); ++i) {
    out += csv::quote(cm.class_list[i]);
    for (std::size_t j = 0; j < cm.n_classes(); ++j) out += "," + std::to_string(cm.at(i, j));
    out += "\n";
  }
  return out;
}

std::string metrics_csv(const EvalReport& report) {
  const auto& cm = report.matrix;
  std::string out = "class,samples,correct,accuracy\n";
  for (std::size_t i = 0; i < cm.n_classes(); ++i) {
    out += csv::quote(cm.class_list[i]) + "," + std::to_string(cm.row_sum(i)) + "," + std::to_string(cm.at(i, i)) + ",";
    if (report.per_class[i]) out += format_fixed(*report.per_class[i], 6);
    out += "\n";
  }
  out += "average,,," + format_fixed(report.average, 6) + "\n";
  out += "overall," + std::to_string(cm.total()) + "," + std::to_string(cm.trace()) + "," + format_fixed(report.overall, 6) + "\n";
  for (std::size_t f = 0; f < report.folds.size(); ++f) {
    const auto& fold = report.folds[f];
    out += "fold" + std::to_string(f + 1) + "," + std::to_string(fold.matrix.total()) + "," +
           std::to_string(fold.matrix.trace()) + "," + format_fixed(fold.overall, 6) + "\n";
  }
  return out;
}

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out.push_back(c);
    }
  }
  return out;
}

// White to dark blue.
std::string heat_colour(double fraction) {
  fraction = std::clamp(fraction, 0.0, 1.0);
  auto lerp = [fraction](int a, int b) { return static_cast<int>(std::lround(a + (b - a) * fraction)); };
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", lerp(255, 8), lerp(255, 48), lerp(255, 107));
  return buf;
}

}  // namespace

std::string confusion_svg(const ConfusionMatrix& cm, const std::string& title) {
  const int cell = 48;
  const int left = 140;
  const int top = 120;
  const int n = static_cast<int>(cm.n_classes());
  const int width = left + n * cell + 20;
  const int height = top + n * cell + 40;
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\">\n";
  os << "  <text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << xml_escape(title)
     << "</text>\n";
  os << "  <text x=\"" << left + n * cell / 2 << "\" y=\"" << top - 96
     << "\" text-anchor=\"middle\" font-size=\"12\">predicted</text>\n";
  os << "  <text x=\"16\" y=\"" << top + n * cell / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
     << top + n * cell / 2 << ")\">true</text>\n";
  for (int j = 0; j < n; ++j) {
    const int x = left + j * cell + cell / 2;
    os << "  <text x=\"" << x << "\" y=\"" << top - 6 << "\" font-size=\"11\" transform=\"rotate(-60 " << x << " " << top - 6
       << ")\">" << xml_escape(cm.class_list[j]) << "</text>\n";
  }
  for (int i = 0; i < n; ++i) {
    const auto row_total = cm.row_sum(i);
    os << "  <text x=\"" << left - 6 << "\" y=\"" << top + i * cell + cell / 2 + 4
       << "\" text-anchor=\"end\" font-size=\"11\">" << xml_escape(cm.class_list[i]) << "</text>\n";
    for (int j = 0; j < n; ++j) {
      const double frac = row_total ? static_cast<double>(cm.at(i, j)) / static_cast<double>(row_total) : 0.0;
      const int x = left + j * cell;
      const int y = top + i * cell;
      os << "  <rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\""
         << heat_colour(frac) << "\" stroke=\"#999999\" stroke-width=\"0.5\"><title>" << xml_escape(cm.class_list[i])
         << " as " << xml_escape(cm.class_list[j]) << ": " << cm.at(i, j) << "</title></rect>\n";
      os << "  <text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"middle\" font-size=\"10\" fill=\""
         << (frac > 0.5 ? "#ffffff" : "#000000") << "\">" << format_fixed(100.0 * frac, 1) << "%</text>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

namespace {

std::string optional_cell(const std::optional<double>& v) { return v ? format_fixed(*v, 6) : std::string(); }

}  // namespace

std::string history_csv(const TrainingHistory& history) {
  std::string out = "epoch,output_error,layer1_1nn_error,layer2_1nn_error\n";
  for (const auto& e : history.epochs) {
    out += std::to_string(e.epoch) + "," + optional_cell(e.output_error) + "," + optional_cell(e.layer1_error) + "," +
           optional_cell(e.layer2_error) + "\n";
  }
  return out;
}

std::string loss_csv(const TrainingHistory& history) {
  std::string out = "epoch,train_loss\n";
  for (const auto& e : history.epochs) out += std::to_string(e.epoch) + "," + format_fixed(e.train_loss, 6) + "\n";
  return out;
}

std::string history_svg(const TrainingHistory& history) {
  const int width = 640, height = 400;
  const int left = 60, right = 160, top = 40, bottom = 50;
  const int plot_w = width - left - right;
  const int plot_h = height - top - bottom;
  const std::size_t n = history.epochs.size();
  const double max_epoch = n > 1 ? static_cast<double>(history.epochs.back().epoch) : 1.0;
  const double min_epoch = n > 0 ? static_cast<double>(history.epochs.front().epoch) : 0.0;
  auto px = [&](double epoch) {
    const double span = max_epoch - min_epoch;
    return left + (span > 0 ? (epoch - min_epoch) / span : 0.0) * plot_w;
  };
  auto py = [&](double err) { return top + (1.0 - std::clamp(err, 0.0, 1.0)) * plot_h; };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\">\n";
  os << "  <text x=\"" << left + plot_w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">Validation error per epoch</text>\n";
  os << "  <line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\"" << top + plot_h
     << "\" stroke=\"#000000\"/>\n";
  os << "  <line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h << "\" stroke=\"#000000\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = t / 4.0;
    os << "  <line x1=\"" << left - 4 << "\" y1=\"" << format_fixed(py(v), 1) << "\" x2=\"" << left + plot_w << "\" y2=\""
       << format_fixed(py(v), 1) << "\" stroke=\"#dddddd\"/>\n";
    os << "  <text x=\"" << left - 8 << "\" y=\"" << format_fixed(py(v) + 4, 1) << "\" text-anchor=\"end\" font-size=\"11\">"
       << format_fixed(v, 2) << "</text>\n";
  }
  if (n > 0) {
    for (const double epoch : {min_epoch, max_epoch}) {
      os << "  <text x=\"" << format_fixed(px(epoch), 1) << "\" y=\"" << top + plot_h + 16
         << "\" text-anchor=\"middle\" font-size=\"11\">" << static_cast<long long>(epoch) << "</text>\n";
    }
  }
  os << "  <text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\" font-size=\"12\">epoch</text>\n";
  os << "  <text x=\"16\" y=\"" << top + plot_h / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
     << top + plot_h / 2 << ")\">error</text>\n";

  struct Curve {
    const char* name;
    const char* colour;
    std::optional<double> EpochRecord::*field;
  };
  const Curve curves[] = {{"output layer", "#d62728", &EpochRecord::output_error},
                          {"layer 1, 1-NN", "#1f77b4", &EpochRecord::layer1_error},
                          {"layer 2, 1-NN", "#2ca02c", &EpochRecord::layer2_error}};
  bool any = false;
  int legend_row = 0;
  for (const auto& c : curves) {
    std::string points;
    for (const auto& e : history.epochs) {
      const auto& v = e.*(c.field);
      if (!v) continue;
      if (!points.empty()) points += " ";
      points += format_fixed(px(static_cast<double>(e.epoch)), 1) + "," + format_fixed(py(*v), 1);
    }
    if (points.empty()) continue;
    any = true;
    os << "  <polyline fill=\"none\" stroke=\"" << c.colour << "\" stroke-width=\"2\" points=\"" << points << "\"/>\n";
    const int ly = top + 10 + 20 * legend_row++;
    os << "  <line x1=\"" << left + plot_w + 12 << "\" y1=\"" << ly << "\" x2=\"" << left + plot_w + 36 << "\" y2=\"" << ly
       << "\" stroke=\"" << c.colour << "\" stroke-width=\"2\"/>\n";
    os << "  <text x=\"" << left + plot_w + 42 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">" << c.name << "</text>\n";
  }
  if (!any) {
    os << "  <text x=\"" << left + plot_w / 2 << "\" y=\"" << top + plot_h / 2
       << "\" text-anchor=\"middle\" font-size=\"12\">no validation data</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void render_report(const EvalReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_text_file(dir / "confusion.csv", confusion_csv(report.matrix));
  write_text_file(dir / "metrics.csv", metrics_csv(report));
  write_text_file(dir / "confusion.svg", confusion_svg(report.matrix));
}

void render_history(const TrainingHistory& history, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_text_file(dir / "history.csv", history_csv(history));
  write_text_file(dir / "loss.csv", loss_csv(history));
  write_text_file(dir / "history.svg", history_svg(history));
}

namespace {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

template <typename Num>
Num parse_number(const std::string& s, std::string_view source, std::size_t line_no) {
  Num v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError(std::string(source) + ":" + std::to_string(line_no) + ": invalid number '" + s + "'");
  }
  return v;
}

}  // namespace

ConfusionMatrix parse_confusion_csv(const std::string& text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw ParseError("confusion.csv: empty");
  const auto header = csv::split_line(lines[0], "confusion.csv", 1);
  ConfusionMatrix cm(std::vector<std::string>(header.begin() + 1, header.end()));
  if (lines.size() != cm.n_classes() + 1) throw ParseError("confusion.csv: expected one row per class");
  for (std::size_t i = 0; i < cm.n_classes(); ++i) {
    const auto fields = csv::split_line(lines[i + 1], "confusion.csv", i + 2);
    if (fields.size() != cm.n_classes() + 1 || fields[0] != cm.class_list[i]) {
      throw ParseError("confusion.csv:" + std::to_string(i + 2) + ": row does not match header");
    }
    for (std::size_t j = 0; j < cm.n_classes(); ++j) cm.at(i, j) = parse_number<std::uint64_t>(fields[j + 1], "confusion.csv", i + 2);
  }
  return cm;
}

ConfusionMatrix read_confusion_csv(const std::filesystem::path& path) { return parse_confusion_csv(read_text_file(path)); }

TrainingHistory read_history(const std::filesystem::path& history_csv_path) {
  const auto lines = lines_of(read_text_file(history_csv_path));
  const std::string src = history_csv_path.string();
  if (lines.empty() || lines[0] != "epoch,output_error,layer1_1nn_error,layer2_1nn_error") {
    throw ParseError(src + ":1: unexpected history header");
  }
  auto opt = [&](const std::string& s, std::size_t line_no) -> std::optional<double> {
    if (s.empty()) return std::nullopt;
    return parse_number<double>(s, src, line_no);
  };
  TrainingHistory h;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = csv::split_line(lines[i], src, i + 1);
    if (f.size() != 4) throw ParseError(src + ":" + std::to_string(i + 1) + ": expected 4 columns");
    EpochRecord e;
    e.epoch = parse_number<std::size_t>(f[0], src, i + 1);
    e.output_error = opt(f[1], i + 1);
    e.layer1_error = opt(f[2], i + 1);
    e.layer2_error = opt(f[3], i + 1);
    h.epochs.push_back(e);
  }
  const auto loss_path = history_csv_path.parent_path() / "loss.csv";
  if (std::filesystem::exists(loss_path)) {
    const auto loss_lines = lines_of(read_text_file(loss_path));
    for (std::size_t i = 1; i < loss_lines.size() && i - 1 < h.epochs.size(); ++i) {
      const auto f = csv::split_line(loss_lines[i], loss_path.string(), i + 1);
      if (f.size() == 2) h.epochs[i - 1].train_loss = parse_number<double>(f[1], loss_path.string(), i + 1);
    }
  }
  return h;
}

}  // namespace scripta
