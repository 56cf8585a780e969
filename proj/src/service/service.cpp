#include "rwlp/service.hpp"

#include <cmath>
#include <iostream>
#include <regex>

#include "rwlp/errors.hpp"
#include "rwlp/formats.hpp"
#include "rwlp/outputs.hpp"
#include "rwlp/version.hpp"

// After Eigen: resolv.h, pulled in by httplib, defines a macro that breaks it.
#include <httplib.h>

namespace rwlp::service {

namespace {

Response error(int status, const std::string& message) {
  return {status, {{"error", message}}};
}

bool isJsonContentType(std::string_view type) {
  const auto semi = type.find(';');
  std::string base(type.substr(0, semi));
  while (!base.empty() && base.back() == ' ') base.pop_back();
  for (char& c : base) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return base == "application/json";
}

double asFloat32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

Response handlePropagate(std::string_view body, std::string_view contentType) {
  if (!isJsonContentType(contentType)) {
    return error(415, "content-type must be application/json");
  }
  nlohmann::json req;
  try {
    req = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    return error(400, std::string("malformed JSON: ") + e.what());
  }

  try {
    if (req.is_object() && req.contains("width") && req.contains("height") &&
        req["width"].is_number_integer() && req["height"].is_number_integer()) {
      const auto w = req["width"].get<std::int64_t>();
      const auto h = req["height"].get<std::int64_t>();
      if (w > 0 && h > 0 &&
          static_cast<double>(w) * static_cast<double>(h) > static_cast<double>(kMaxRequestPixels)) {
        return error(422, "field 'width'/'height': at most 262144 pixels per request");
      }
    }
    const io::LabelsDocument doc = io::parseLabels(req);
    const std::size_t n = doc.lattice.size();

    std::vector<double> b(n, 0.0);
    if (req.contains("boundary") && !req["boundary"].is_null()) {
      const auto& arr = req["boundary"];
      if (!arr.is_array() || arr.size() != n) {
        throw ValidationError("field 'boundary' must be an array of width*height numbers");
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (!arr[i].is_number()) {
          throw ValidationError("field 'boundary[" + std::to_string(i) + "]' must be a number");
        }
        b[i] = arr[i].get<double>();
      }
    }
    double alpha = 1.0;
    if (req.contains("alpha") && !req["alpha"].is_null()) {
      if (!req["alpha"].is_number()) throw ValidationError("field 'alpha' must be a number");
      alpha = req["alpha"].get<double>();
      if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        throw ValidationError("field 'alpha' must be finite and nonnegative");
      }
    }
    BoundaryField boundary = [&] {
      try {
        return BoundaryField(doc.lattice, std::move(b));
      } catch (const ValidationError& e) {
        throw ValidationError(std::string("field 'boundary': ") + e.what());
      }
    }();
    if (doc.labels.empty()) throw ValidationError("no absorbing pixels");

    const PropagationOutputs out = computeOutputs(doc.lattice, doc.labels, boundary, alpha);
    nlohmann::json p = nlohmann::json::array();
    for (double v : out.propagation.p.field().values()) p.push_back(asFloat32(v));
    nlohmann::json entropy = nlohmann::json::array();
    for (double v : out.entropy) entropy.push_back(asFloat32(v));
    nlohmann::json weights = nlohmann::json::array();
    for (double v : out.weights) weights.push_back(asFloat32(v));
    return {200,
            {{"p", std::move(p)},
             {"map", out.map},
             {"entropy", std::move(entropy)},
             {"weights", std::move(weights)},
             {"unreached", out.propagation.unreached},
             {"solveMillis", out.solveMillis}}};
  } catch (const ValidationError& e) {
    return error(422, e.what());
  } catch (const SolverError& e) {
    return error(500, std::string("solver failure: ") + e.what());
  } catch (const ContractError& e) {
    return error(422, e.what());
  }
}

Response handleHealth() {
  return {200, {{"status", "ok"}, {"version", kVersion}}};
}

bool isLocalOrigin(std::string_view origin) {
  static const std::regex local(R"(^https?://(localhost|127\.0\.0\.1|\[::1\])(:[0-9]{1,5})?$)");
  return std::regex_match(origin.begin(), origin.end(), local);
}

void installRoutes(httplib::Server& server) {
  auto send = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto notAllowed = [send](const char* allow) {
    return [send, allow](const httplib::Request&, httplib::Response& res) {
      res.set_header("Allow", allow);
      send(res, error(405, "method not allowed"));
    };
  };

  server.set_post_routing_handler([](const httplib::Request& req, httplib::Response& res) {
    const std::string origin = req.get_header_value("Origin");
    if (!origin.empty() && isLocalOrigin(origin)) {
      res.set_header("Access-Control-Allow-Origin", origin);
      res.set_header("Vary", "Origin");
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
    }
  });

  server.Get("/api/health", [send](const httplib::Request&, httplib::Response& res) {
    send(res, handleHealth());
  });
  server.Post("/api/health", notAllowed("GET"));
  server.Put("/api/health", notAllowed("GET"));
  server.Patch("/api/health", notAllowed("GET"));
  server.Delete("/api/health", notAllowed("GET"));

  server.Post("/api/propagate", [send](const httplib::Request& req, httplib::Response& res) {
    send(res, handlePropagate(req.body, req.get_header_value("Content-Type")));
  });
  server.Get("/api/propagate", notAllowed("POST"));
  server.Put("/api/propagate", notAllowed("POST"));
  server.Patch("/api/propagate", notAllowed("POST"));
  server.Delete("/api/propagate", notAllowed("POST"));

  server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });
}

bool serve(const std::string& host, int port) {
  httplib::Server server;
  installRoutes(server);
  std::cerr << "rwlp service listening on http://" << host << ":" << port << "\n";
  return server.listen(host, port);
}

}  // namespace rwlp::service
