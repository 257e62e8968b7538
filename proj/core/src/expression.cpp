#include "kolmo/expression.hpp"

#include <cctype>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "kolmo/smooth_power.hpp"

namespace kolmo {

namespace {

struct Const final : Expression {
    double v;
    explicit Const(double value) : v(value) {}
    double eval(double, const Eigen::VectorXd&) const override { return v; }
};

struct TimeVar final : Expression {
    double eval(double s, const Eigen::VectorXd&) const override { return s; }
};

struct Coord final : Expression {
    int index;
    explicit Coord(int k) : index(k) {}
    double eval(double, const Eigen::VectorXd& x) const override {
        if (index >= x.size()) throw std::out_of_range("expression references coordinate beyond dimension");
        return x[index];
    }
};

struct Unary final : Expression {
    std::function<double(double)> op;
    ExprPtr arg;
    double eval(double s, const Eigen::VectorXd& x) const override { return op(arg->eval(s, x)); }
};

struct Binary final : Expression {
    char op;
    ExprPtr lhs, rhs;
    double eval(double s, const Eigen::VectorXd& x) const override {
        const double a = lhs->eval(s, x);
        const double b = rhs->eval(s, x);
        switch (op) {
            case '+': return a + b;
            case '-': return a - b;
            case '*': return a * b;
            case '/': return a / b;
            case '^': return std::pow(a, b);
        }
        return 0.0;
    }
};

struct SmoothPow final : Expression {
    SmoothPower sp;
    double eval(double, const Eigen::VectorXd& x) const override { return sp.value(x); }
};

class Parser {
  public:
    explicit Parser(const std::string& text) : text_(text) {}

    ExprPtr parse() {
        ExprPtr e = expr();
        skip_ws();
        if (pos_ != text_.size()) fail("trailing input");
        return e;
    }

  private:
    const std::string& text_;
    size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& what) const {
        throw std::invalid_argument("expression parse error at position " + std::to_string(pos_) +
                                    ": " + what);
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool consume(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!consume(c)) fail(std::string("expected '") + c + "'");
    }

    ExprPtr expr() {
        ExprPtr lhs = term();
        for (;;) {
            if (consume('+')) lhs = binary('+', lhs, term());
            else if (consume('-')) lhs = binary('-', lhs, term());
            else return lhs;
        }
    }

    ExprPtr term() {
        ExprPtr lhs = factor();
        for (;;) {
            if (consume('*')) lhs = binary('*', lhs, factor());
            else if (consume('/')) lhs = binary('/', lhs, factor());
            else return lhs;
        }
    }

    // '^' binds tighter than unary minus: -x^2 parses as -(x^2)
    ExprPtr factor() {
        if (consume('-')) {
            auto node = std::make_shared<Unary>();
            node->op = [](double v) { return -v; };
            node->arg = factor();
            return node;
        }
        return power();
    }

    ExprPtr power() {
        ExprPtr base = primary();
        if (consume('^')) return binary('^', base, factor());
        return base;
    }

    static ExprPtr binary(char op, ExprPtr lhs, ExprPtr rhs) {
        auto node = std::make_shared<Binary>();
        node->op = op;
        node->lhs = std::move(lhs);
        node->rhs = std::move(rhs);
        return node;
    }

    ExprPtr primary() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        const char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
        if (consume('(')) {
            ExprPtr e = expr();
            expect(')');
            return e;
        }
        fail("unexpected character");
    }

    ExprPtr number() {
        size_t consumed = 0;
        double v = 0.0;
        try {
            v = std::stod(text_.substr(pos_), &consumed);
        } catch (const std::exception&) {
            fail("malformed number");
        }
        pos_ += consumed;
        return std::make_shared<Const>(v);
    }

    ExprPtr identifier() {
        const size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        const std::string name = text_.substr(start, pos_ - start);
        if (name == "s") return std::make_shared<TimeVar>();
        if (name.size() >= 1 && name[0] == 'x') {
            if (name == "x") return std::make_shared<Coord>(0);
            bool digits = name.size() > 1;
            for (size_t i = 1; i < name.size(); ++i)
                digits = digits && std::isdigit(static_cast<unsigned char>(name[i]));
            if (digits) {
                const int k = std::stoi(name.substr(1));
                if (k < 1) fail("coordinate indices start at x1");
                return std::make_shared<Coord>(k - 1);
            }
        }
        if (name == "abs" || name == "exp") {
            expect('(');
            auto node = std::make_shared<Unary>();
            node->op = (name == "abs") ? std::function<double(double)>([](double v) { return std::abs(v); })
                                       : std::function<double(double)>([](double v) { return std::exp(v); });
            node->arg = expr();
            expect(')');
            return node;
        }
        if (name == "smoothpow") {
            expect('(');
            ExprPtr exponent = expr();
            expect(',');
            skip_ws();
            // second argument must be the bare point token 'x'
            if (pos_ >= text_.size() || text_[pos_] != 'x') fail("smoothpow expects the point 'x'");
            ++pos_;
            expect(')');
            double s_const = 0.0;
            try {
                s_const = exponent->eval(0.0, Eigen::VectorXd::Zero(1));
                const double probe = exponent->eval(1.0, Eigen::VectorXd::Constant(1, 2.0));
                if (probe != s_const) fail("smoothpow exponent must be constant");
            } catch (const std::invalid_argument&) {
                throw;
            } catch (const std::exception&) {
                fail("smoothpow exponent must be constant");
            }
            auto node = std::make_shared<SmoothPow>();
            node->sp = make_smooth_power(s_const);
            return node;
        }
        fail("unknown identifier '" + name + "'");
    }
};

}  // namespace

ExprPtr parse_expression(const std::string& text) { return Parser(text).parse(); }

}  // namespace kolmo
