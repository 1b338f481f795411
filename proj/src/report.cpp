#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>

#include "dqgm/harness.hpp"

namespace dqgm::harness {
namespace {

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::ofstream open(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

constexpr std::array<const char*, 7> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                              "#ff7f0e", "#8c564b", "#17becf"};

}  // namespace

void emit_csv(const SweepTable& table, std::ostream& out) {
  if (table.rows.empty()) throw std::invalid_argument("cannot emit an empty table");
  out << "algo,R,emp_mean,emp_p05,emp_p95,bound,unquantized_sigma,converse\n";
  for (const auto& r : table.rows) {
    out << name(r.algo) << ',' << r.rate << ',' << number(r.emp_mean) << ','
        << number(r.emp_p05) << ',' << number(r.emp_p95) << ',' << number(r.bound) << ','
        << number(r.unquantized_sigma) << ',' << number(r.converse) << '\n';
  }
}

void emit_csv(const SweepTable& table, const std::filesystem::path& path) {
  auto out = open(path);
  emit_csv(table, out);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void emit_svg(const SweepTable& table, std::ostream& out) {
  if (table.rows.empty()) throw std::invalid_argument("cannot emit an empty table");
  constexpr double width = 720, height = 440;
  constexpr double left = 60, right = 200, top = 40, bottom = 50;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  std::vector<Algo> algos;
  int rmin = table.rows.front().rate, rmax = rmin;
  for (const auto& r : table.rows) {
    if (std::find(algos.begin(), algos.end(), r.algo) == algos.end()) algos.push_back(r.algo);
    rmin = std::min(rmin, r.rate);
    rmax = std::max(rmax, r.rate);
  }
  const double span = rmax > rmin ? rmax - rmin : 1.0;
  auto px = [&](double rate) { return left + (rate - rmin) / span * plot_w; };
  auto py = [&](double v) { return top + (1.0 - std::clamp(v, 0.0, 1.0)) * plot_h; };

  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n"
      << "<text x=\"" << coord(left + plot_w / 2) << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"15\">" << escape(table.name) << "</text>\n";

  // Axes, ticks and grid.
  out << "<g stroke=\"black\" stroke-width=\"1\" fill=\"none\">\n"
      << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << coord(plot_w)
      << "\" height=\"" << coord(plot_h) << "\"/>\n</g>\n";
  out << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = i / 5.0;
    out << "<line x1=\"" << left << "\" x2=\"" << coord(left + plot_w) << "\" y1=\""
        << coord(py(v)) << "\" y2=\"" << coord(py(v)) << "\" stroke=\"#dddddd\"/>\n"
        << "<text x=\"" << coord(left - 6) << "\" y=\"" << coord(py(v) + 4)
        << "\" text-anchor=\"end\">" << coord(v).substr(0, 3) << "</text>\n";
  }
  for (int r = rmin; r <= rmax; ++r) {
    out << "<text x=\"" << coord(px(r)) << "\" y=\"" << coord(top + plot_h + 16)
        << "\" text-anchor=\"middle\">" << r << "</text>\n";
  }
  out << "<text x=\"" << coord(left + plot_w / 2) << "\" y=\"" << coord(height - 12)
      << "\" text-anchor=\"middle\">rate R (bits per dimension)</text>\n"
      << "<text x=\"16\" y=\"" << coord(top + plot_h / 2) << "\" text-anchor=\"middle\" "
      << "transform=\"rotate(-90 16 " << coord(top + plot_h / 2) << ")\">contraction factor</text>\n"
      << "</g>\n";

  struct Legend {
    std::string label;
    std::string color;
    std::string dash;
    bool marker;
  };
  std::vector<Legend> legend;
  auto polyline = [&](const std::vector<std::pair<int, double>>& pts, const std::string& color,
                      const std::string& dash) {
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"";
    if (!dash.empty()) out << " stroke-dasharray=\"" << dash << "\"";
    out << " points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i)
      out << (i ? " " : "") << coord(px(pts[i].first)) << ',' << coord(py(pts[i].second));
    out << "\"/>\n";
  };

  std::set<bounds::ConverseFamily> families;
  for (std::size_t a = 0; a < algos.size(); ++a) {
    const std::string color = kPalette[a % kPalette.size()];
    std::vector<std::pair<int, double>> emp, bnd;
    bounds::ConverseFamily family = bounds::converse_family(scheme(algos[a]));
    std::vector<std::pair<int, double>> conv;
    for (const auto& r : table.rows) {
      if (r.algo != algos[a]) continue;
      emp.emplace_back(r.rate, std::min(r.emp_mean, 1.0));
      bnd.emplace_back(r.rate, std::min(r.bound, 1.0));
      conv.emplace_back(r.rate, std::min(r.converse, 1.0));
    }
    std::sort(emp.begin(), emp.end());
    std::sort(bnd.begin(), bnd.end());
    std::sort(conv.begin(), conv.end());
    polyline(emp, color, "");
    for (const auto& [rate, v] : emp)
      out << "<circle cx=\"" << coord(px(rate)) << "\" cy=\"" << coord(py(v))
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    legend.push_back({name(algos[a]) + " empirical", color, "", true});
    polyline(bnd, color, "6,4");
    legend.push_back({name(algos[a]) + " bound", color, "6,4", false});
    if (is_quantized(algos[a]) && families.insert(family).second) {
      polyline(conv, "#555555", "2,3");
      legend.push_back({family == bounds::ConverseFamily::gradient_descent ? "converse (GD)"
                                                                           : "converse (GM)",
                        "#555555", "2,3", false});
    }
  }

  out << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  double ly = top + 8;
  const double lx = left + plot_w + 16;
  for (const auto& l : legend) {
    out << "<line x1=\"" << coord(lx) << "\" x2=\"" << coord(lx + 24) << "\" y1=\"" << coord(ly)
        << "\" y2=\"" << coord(ly) << "\" stroke=\"" << l.color << "\" stroke-width=\"1.5\"";
    if (!l.dash.empty()) out << " stroke-dasharray=\"" << l.dash << "\"";
    out << "/>\n";
    if (l.marker)
      out << "<circle cx=\"" << coord(lx + 12) << "\" cy=\"" << coord(ly) << "\" r=\"3\" fill=\""
          << l.color << "\"/>\n";
    out << "<text x=\"" << coord(lx + 30) << "\" y=\"" << coord(ly + 4) << "\">" << escape(l.label)
        << "</text>\n";
    ly += 18;
  }
  out << "</g>\n</svg>\n";
}

void emit_svg(const SweepTable& table, const std::filesystem::path& path) {
  auto out = open(path);
  emit_svg(table, out);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace dqgm::harness
