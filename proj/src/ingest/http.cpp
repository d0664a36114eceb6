#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <fixctx/ingest/ingest.hpp>

namespace fixctx::ingest {

namespace {

class HttplibTransport final : public Transport {
public:
    HttplibTransport(const std::string& base_url, std::chrono::seconds timeout) : client_(base_url)
    {
        client_.set_connection_timeout(timeout);
        client_.set_read_timeout(timeout);
        client_.set_follow_location(true);
        client_.set_default_headers({{"Accept", "application/json"}});
    }

    HttpResponse get(const std::string& path) override
    {
        auto res = client_.Get(path);
        if (!res) return HttpResponse{0, httplib::to_string(res.error())};
        return HttpResponse{res->status, res->body};
    }

private:
    httplib::Client client_;
};

} // namespace

std::unique_ptr<Transport> make_http_transport(const std::string& base_url, std::chrono::seconds timeout)
{
    return std::make_unique<HttplibTransport>(base_url, timeout);
}

} // namespace fixctx::ingest
