/*!
  \file sop.hpp
  \brief Two-level (sum-of-products) minimization over explicit truth tables

  Exact minimum-cube covers via prime implicant generation and branch and
  bound for up to 8 variables; a greedy expand/irredundant pass above that.
*/

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

namespace fluxsynth
{

/*! \brief A product term over local variables 0..n-1.
 *
 * Variable i appears iff bit i of `mask` is set; its polarity is bit i of
 * `value` (1 = positive literal). Bits of `value` outside `mask` are zero.
 */
struct cube
{
  uint32_t mask{ 0 };
  uint32_t value{ 0 };

  bool contains( uint32_t minterm ) const { return ( minterm & mask ) == value; }
  uint32_t literals() const { return static_cast<uint32_t>( std::popcount( mask ) ); }

  auto operator<=>( cube const& ) const = default;
};

namespace detail
{

inline std::vector<cube> prime_implicants( uint32_t nvars, std::vector<bool> const& on, std::vector<bool> const& dc )
{
  uint32_t const full = nvars == 32 ? ~0u : ( ( 1u << nvars ) - 1u );
  std::set<cube> current;
  for ( uint32_t m = 0; m < on.size(); ++m )
    if ( on[m] || dc[m] )
      current.insert( cube{ full, m } );

  std::vector<cube> primes;
  while ( !current.empty() )
  {
    std::set<cube> next;
    std::set<cube> merged;
    /* group by mask: only cubes with equal masks differing in one bit combine */
    std::map<uint32_t, std::vector<cube>> by_mask;
    for ( auto const& c : current )
      by_mask[c.mask].push_back( c );
    for ( auto const& [mask, cubes] : by_mask )
    {
      std::set<uint32_t> values;
      for ( auto const& c : cubes )
        values.insert( c.value );
      for ( auto const& c : cubes )
      {
        for ( uint32_t v = 0; v < nvars; ++v )
        {
          uint32_t const bit = 1u << v;
          if ( !( mask & bit ) || ( c.value & bit ) )
            continue;
          if ( values.count( c.value | bit ) )
          {
            next.insert( cube{ mask & ~bit, c.value } );
            merged.insert( c );
            merged.insert( cube{ mask, c.value | bit } );
          }
        }
      }
    }
    for ( auto const& c : current )
      if ( !merged.count( c ) )
        primes.push_back( c );
    current = std::move( next );
  }
  std::sort( primes.begin(), primes.end() );
  return primes;
}

struct cover_search
{
  std::vector<cube> const& primes;
  std::vector<std::vector<uint32_t>> covering; /* minterm slot -> prime indices */
  std::vector<std::vector<uint32_t>> covers;   /* prime index -> minterm slots */
  std::vector<uint32_t> best;
  uint32_t best_literals{ 0 };
  bool found{ false };

  uint32_t literal_cost( std::vector<uint32_t> const& sel ) const
  {
    uint32_t n = 0;
    for ( auto p : sel )
      n += primes[p].literals();
    return n;
  }

  /* size of a set of uncovered minterms no two of which share a prime */
  uint32_t lower_bound( std::vector<uint32_t> const& uncovered_count ) const
  {
    std::vector<bool> blocked( primes.size(), false );
    uint32_t lb = 0;
    for ( uint32_t m = 0; m < covering.size(); ++m )
    {
      if ( uncovered_count[m] != 0 )
        continue;
      bool independent = true;
      for ( auto p : covering[m] )
        if ( blocked[p] )
        {
          independent = false;
          break;
        }
      if ( !independent )
        continue;
      ++lb;
      for ( auto p : covering[m] )
        blocked[p] = true;
    }
    return lb;
  }

  void run( std::vector<uint32_t>& chosen, std::vector<uint32_t>& hits )
  {
    /* hits[m] = number of chosen primes covering slot m */
    uint32_t pick = UINT32_MAX;
    std::size_t fewest = SIZE_MAX;
    for ( uint32_t m = 0; m < covering.size(); ++m )
      if ( hits[m] == 0 && covering[m].size() < fewest )
      {
        fewest = covering[m].size();
        pick = m;
      }
    if ( pick == UINT32_MAX )
    {
      auto const lits = literal_cost( chosen );
      if ( !found || chosen.size() < best.size() || ( chosen.size() == best.size() && lits < best_literals ) )
      {
        best = chosen;
        best_literals = lits;
        found = true;
      }
      return;
    }
    if ( found && chosen.size() + lower_bound( hits ) > best.size() )
      return;
    if ( found && chosen.size() + 1 > best.size() )
      return;

    auto candidates = covering[pick];
    std::stable_sort( candidates.begin(), candidates.end(), [&]( uint32_t a, uint32_t b ) {
      if ( covers[a].size() != covers[b].size() )
        return covers[a].size() > covers[b].size();
      return primes[a].literals() < primes[b].literals();
    } );
    for ( auto p : candidates )
    {
      chosen.push_back( p );
      for ( auto m : covers[p] )
        ++hits[m];
      run( chosen, hits );
      for ( auto m : covers[p] )
        --hits[m];
      chosen.pop_back();
    }
  }
};

inline std::vector<cube> sort_cover( std::vector<cube> c )
{
  std::sort( c.begin(), c.end(), []( cube const& a, cube const& b ) {
    if ( a.literals() != b.literals() )
      return a.literals() < b.literals();
    return a < b;
  } );
  return c;
}

} // namespace detail

/*! \brief Minimum-cube SOP cover of `on` using `dc` as don't-cares.
 *
 * Ties in cube count are broken by total literal count. Intended for
 * nvars <= 8; the tables have 2^nvars entries.
 */
inline std::vector<cube> minimize_exact( uint32_t nvars, std::vector<bool> const& on, std::vector<bool> const& dc )
{
  auto const primes = detail::prime_implicants( nvars, on, dc );

  std::vector<uint32_t> slots;
  for ( uint32_t m = 0; m < on.size(); ++m )
    if ( on[m] && !dc[m] )
      slots.push_back( m );
  if ( slots.empty() )
    return {};

  detail::cover_search search{ primes, {}, {}, {}, 0, false };
  search.covering.resize( slots.size() );
  search.covers.resize( primes.size() );
  for ( uint32_t s = 0; s < slots.size(); ++s )
    for ( uint32_t p = 0; p < primes.size(); ++p )
      if ( primes[p].contains( slots[s] ) )
      {
        search.covering[s].push_back( p );
        search.covers[p].push_back( s );
      }

  std::vector<uint32_t> chosen;
  std::vector<uint32_t> hits( slots.size(), 0 );
  search.run( chosen, hits );

  std::vector<cube> result;
  for ( auto p : search.best )
    result.push_back( primes[p] );
  return detail::sort_cover( std::move( result ) );
}

/*! \brief Greedy expand-then-irredundant cover for wider tables. */
inline std::vector<cube> minimize_greedy( uint32_t nvars, std::vector<bool> const& on, std::vector<bool> const& dc )
{
  uint32_t const full = ( 1u << nvars ) - 1u;
  auto implicant = [&]( cube const& c ) {
    /* enumerate minterms of c */
    uint32_t const free = full & ~c.mask;
    uint32_t sub = 0;
    do
    {
      uint32_t const m = c.value | sub;
      if ( !on[m] && !dc[m] )
        return false;
      sub = ( sub - free ) & free;
    } while ( sub != 0 );
    return true;
  };

  std::vector<cube> cover;
  std::vector<bool> covered( on.size(), false );
  for ( uint32_t m = 0; m < on.size(); ++m )
  {
    if ( !on[m] || dc[m] || covered[m] )
      continue;
    cube c{ full, m };
    for ( uint32_t v = 0; v < nvars; ++v )
    {
      cube trial{ c.mask & ~( 1u << v ), c.value & ~( 1u << v ) };
      if ( implicant( trial ) )
        c = trial;
    }
    cover.push_back( c );
    for ( uint32_t k = 0; k < on.size(); ++k )
      if ( c.contains( k ) )
        covered[k] = true;
  }

  /* drop cubes whose care minterms are covered by the others */
  for ( std::size_t i = cover.size(); i-- > 0; )
  {
    bool redundant = true;
    for ( uint32_t m = 0; m < on.size() && redundant; ++m )
    {
      if ( !on[m] || dc[m] || !cover[i].contains( m ) )
        continue;
      bool other = false;
      for ( std::size_t j = 0; j < cover.size() && !other; ++j )
        other = j != i && cover[j].contains( m );
      redundant = other;
    }
    if ( redundant )
      cover.erase( cover.begin() + static_cast<std::ptrdiff_t>( i ) );
  }
  return detail::sort_cover( std::move( cover ) );
}

inline constexpr uint32_t exact_sop_limit = 8;

inline std::vector<cube> minimize_cover( uint32_t nvars, std::vector<bool> const& on, std::vector<bool> const& dc )
{
  return nvars <= exact_sop_limit ? minimize_exact( nvars, on, dc ) : minimize_greedy( nvars, on, dc );
}

} // namespace fluxsynth
