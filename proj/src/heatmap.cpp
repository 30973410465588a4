#include "eta/heatmap.hpp"

#include <algorithm>
#include <sstream>

#include "eta/errors.hpp"

namespace eta {

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string heatmap_svg(const Matrix& alpha, const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels) {
  const Eigen::Index N = alpha.rows(), K = alpha.cols();
  if (static_cast<Eigen::Index>(row_labels.size()) != N ||
      static_cast<Eigen::Index>(col_labels.size()) != K)
    throw ShapeError("heatmap_svg: label counts do not match matrix shape");

  const int cell = 28, left = 140, top = 110, fs = 11;
  const int width = left + cell * static_cast<int>(K) + 10;
  const int height = top + cell * static_cast<int>(N) + 10;
  double lo = alpha.minCoeff(), hi = alpha.maxCoeff();
  double span = hi > lo ? hi - lo : 1.0;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" font-family=\"monospace\" font-size=\"" << fs << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (Eigen::Index k = 0; k < K; ++k) {
    int x = left + static_cast<int>(k) * cell + cell / 2;
    svg << "<text x=\"" << x << "\" y=\"" << top - 8 << "\" text-anchor=\"start\" transform=\"rotate(-60 "
        << x << " " << top - 8 << ")\">" << xml_escape(col_labels[k]) << "</text>\n";
  }
  for (Eigen::Index n = 0; n < N; ++n) {
    svg << "<text x=\"" << left - 6 << "\" y=\"" << top + static_cast<int>(n) * cell + cell / 2 + 4
        << "\" text-anchor=\"end\">" << xml_escape(row_labels[n]) << "</text>\n";
    for (Eigen::Index k = 0; k < K; ++k) {
      double v = (alpha(n, k) - lo) / span;
      int shade = 255 - static_cast<int>(std::clamp(v, 0.0, 1.0) * 205.0);
      svg << "<rect x=\"" << left + static_cast<int>(k) * cell << "\" y=\""
          << top + static_cast<int>(n) * cell << "\" width=\"" << cell << "\" height=\"" << cell
          << "\" fill=\"rgb(" << shade << "," << shade << ",255)\" stroke=\"#ccc\"/>\n";
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%.2f", alpha(n, k));
      svg << "<text x=\"" << left + static_cast<int>(k) * cell + cell / 2 << "\" y=\""
          << top + static_cast<int>(n) * cell + cell / 2 + 4
          << "\" text-anchor=\"middle\" fill=\"#333\">" << buf << "</text>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string heatmap_text(const Matrix& alpha, const std::vector<std::string>& row_labels,
                         const std::vector<std::string>& col_labels) {
  const Eigen::Index N = alpha.rows(), K = alpha.cols();
  if (static_cast<Eigen::Index>(row_labels.size()) != N ||
      static_cast<Eigen::Index>(col_labels.size()) != K)
    throw ShapeError("heatmap_text: label counts do not match matrix shape");
  size_t label_w = 5;
  for (const auto& l : row_labels) label_w = std::max(label_w, l.size());

  std::ostringstream out;
  out << std::string(label_w, ' ');
  for (Eigen::Index k = 0; k < K; ++k) {
    std::string name = col_labels[k].size() > 8 ? col_labels[k].substr(0, 8) : col_labels[k];
    char buf[16];
    std::snprintf(buf, sizeof(buf), " %8s", name.c_str());
    out << buf;
  }
  out << "\n";
  for (Eigen::Index n = 0; n < N; ++n) {
    char head[64];
    std::snprintf(head, sizeof(head), "%-*s", static_cast<int>(label_w),
                  row_labels[n].c_str());
    out << head;
    for (Eigen::Index k = 0; k < K; ++k) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), " %8.3f", alpha(n, k));
      out << buf;
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace eta
