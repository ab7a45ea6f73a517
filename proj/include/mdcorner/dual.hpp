#ifndef MDCORNER_DUAL_HPP
#define MDCORNER_DUAL_HPP

#include <cmath>
#include <type_traits>

namespace mdc {

/// Forward-mode dual number. Nesting (Dual<Dual<double>>) yields second
/// derivatives, which is what the key-point selector needs.
template <class T>
struct Dual {
    T v{};
    T d{};
};

template <class S>
struct is_dual : std::false_type {};
template <class T>
struct is_dual<Dual<T>> : std::true_type {};

inline double value_of(double x) { return x; }
template <class T>
double value_of(const Dual<T>& x) { return value_of(x.v); }

template <class T> Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) { return {a.v + b.v, a.d + b.d}; }
template <class T> Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) { return {a.v - b.v, a.d - b.d}; }
template <class T> Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) { return {a.v * b.v, a.v * b.d + a.d * b.v}; }
template <class T> Dual<T> operator/(const Dual<T>& a, const Dual<T>& b)
{
    return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)};
}
template <class T> Dual<T> operator-(const Dual<T>& a) { return {-a.v, -a.d}; }

template <class T> Dual<T> operator+(const Dual<T>& a, double b) { return {a.v + b, a.d}; }
template <class T> Dual<T> operator+(double a, const Dual<T>& b) { return {a + b.v, b.d}; }
template <class T> Dual<T> operator-(const Dual<T>& a, double b) { return {a.v - b, a.d}; }
template <class T> Dual<T> operator-(double a, const Dual<T>& b) { return {a - b.v, -b.d}; }
template <class T> Dual<T> operator*(const Dual<T>& a, double b) { return {a.v * b, a.d * b}; }
template <class T> Dual<T> operator*(double a, const Dual<T>& b) { return {a * b.v, a * b.d}; }
template <class T> Dual<T> operator/(const Dual<T>& a, double b) { return {a.v / b, a.d / b}; }

template <class T>
Dual<T> sin(const Dual<T>& x)
{
    using std::cos;
    using std::sin;
    return {sin(x.v), cos(x.v) * x.d};
}

template <class T>
Dual<T> cos(const Dual<T>& x)
{
    using std::cos;
    using std::sin;
    return {cos(x.v), -(sin(x.v) * x.d)};
}

template <class T>
Dual<T> sqrt(const Dual<T>& x)
{
    using std::sqrt;
    T r = sqrt(x.v);
    return {r, x.d / (2.0 * r)};
}

/// First derivative of a scalar callable at t.
template <class F>
double derivative1(const F& f, double t)
{
    return f(Dual<double>{t, 1.0}).d;
}

/// Second derivative of a scalar callable at t.
template <class F>
double derivative2(const F& f, double t)
{
    using D2 = Dual<Dual<double>>;
    return f(D2{{t, 1.0}, {1.0, 0.0}}).d.d;
}

}  // namespace mdc

#endif  // MDCORNER_DUAL_HPP
