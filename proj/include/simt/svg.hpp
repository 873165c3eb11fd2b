#ifndef SIMT_SVG_HPP
#define SIMT_SVG_HPP

// Minimal self-contained SVG writer: no external references, fixed viewBox.

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <string_view>

namespace simt::svg {

inline std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

class Document {
 public:
  Document(double width, double height) : width_(width), height_(height) {}

  void rect(double x, double y, double w, double h, std::string_view fill, std::string_view stroke = "none") {
    body_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
          << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\"/>\n";
  }

  void line(double x1, double y1, double x2, double y2, std::string_view stroke, double width = 1.0,
            std::string_view dash = "") {
    body_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\"" << num(y2)
          << "\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width) << "\"";
    if (!dash.empty()) body_ << " stroke-dasharray=\"" << dash << "\"";
    body_ << "/>\n";
  }

  void polyline(std::string_view points, std::string_view stroke, double width = 1.5) {
    body_ << "<polyline points=\"" << points << "\" fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\""
          << num(width) << "\"/>\n";
  }

  void polygon(std::string_view points, std::string_view fill, std::string_view stroke = "none") {
    body_ << "<polygon points=\"" << points << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\"/>\n";
  }

  void circle(double cx, double cy, double r, std::string_view fill, std::string_view stroke = "none") {
    body_ << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(cy) << "\" r=\"" << num(r) << "\" fill=\"" << fill
          << "\" stroke=\"" << stroke << "\"/>\n";
  }

  void text(double x, double y, std::string_view content, double size = 12, std::string_view anchor = "start",
            double rotate = 0.0) {
    body_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-family=\"sans-serif\" font-size=\""
          << num(size) << "\" text-anchor=\"" << anchor << "\"";
    if (rotate != 0.0) body_ << " transform=\"rotate(" << num(rotate) << " " << num(x) << " " << num(y) << ")\"";
    body_ << ">" << escape(content) << "</text>\n";
  }

  std::string str() const {
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << num(width_) << " " << num(height_)
        << "\" width=\"" << num(width_) << "\" height=\"" << num(height_) << "\">\n"
        << body_.str() << "</svg>\n";
    return out.str();
  }

 private:
  double width_, height_;
  std::ostringstream body_;
};

/// Marker shapes used by the frontier plot.
enum class Marker { triangle_up, triangle_down, diamond, star, circle };

inline void marker(Document& doc, Marker m, double x, double y, double r, std::string_view fill) {
  auto pt = [](double px, double py) { return num(px) + "," + num(py) + " "; };
  switch (m) {
    case Marker::triangle_up:
      doc.polygon(pt(x, y - r) + pt(x - r, y + r) + pt(x + r, y + r), fill, "black");
      break;
    case Marker::triangle_down:
      doc.polygon(pt(x, y + r) + pt(x - r, y - r) + pt(x + r, y - r), fill, "black");
      break;
    case Marker::diamond:
      doc.polygon(pt(x, y - r) + pt(x + r, y) + pt(x, y + r) + pt(x - r, y), fill, "black");
      break;
    case Marker::star: {
      std::string pts;
      for (int k = 0; k < 10; ++k) {
        const double rad = (k % 2 == 0) ? r * 1.3 : r * 0.55;
        const double ang = -1.5707963267948966 + k * 0.6283185307179586;
        pts += pt(x + rad * std::cos(ang), y + rad * std::sin(ang));
      }
      doc.polygon(pts, fill, "black");
      break;
    }
    case Marker::circle:
      doc.circle(x, y, r, fill, "black");
      break;
  }
}

}  // namespace simt::svg

#endif  // SIMT_SVG_HPP
