#include "xlate/service.hpp"

#include <httplib.h>

#include <thread>

namespace xlate {

struct HttpServer::Impl
{
  SessionService& service;
  httplib::Server server;
  std::thread thread;

  explicit Impl(SessionService& s)
    : service(s)
  {
    auto forward = [this](const httplib::Request& req, httplib::Response& res) {
      const auto r = service.handle(req.method, req.path, req.body);
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    };
    server.Get(".*", forward);
    server.Post(".*", forward);
    server.Patch(".*", forward);
    server.Put(".*", forward);
    server.Delete(".*", forward);
  }
};

HttpServer::HttpServer(SessionService& service)
  : impl_(std::make_unique<Impl>(service))
{
}

HttpServer::~HttpServer()
{
  stop();
}

int
HttpServer::start(const std::string& host, int port)
{
  int bound = port;
  if (port == 0)
    bound = impl_->server.bind_to_any_port(host);
  else if (!impl_->server.bind_to_port(host, port))
    bound = -1;
  if (bound < 0)
    return -1;
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

bool
HttpServer::listen(const std::string& host, int port)
{
  return impl_->server.listen(host, port);
}

void
HttpServer::stop()
{
  impl_->server.stop();
  if (impl_->thread.joinable())
    impl_->thread.join();
}

} // namespace xlate
