#pragma once

/* Independent minimum-cover oracle: brute-force prime enumeration over all
 * 3^n cubes and iterative-deepening exact cover. Only for n <= 6. */

#include <cstdint>
#include <functional>
#include <vector>

namespace fluxsynth::test
{

struct oracle_cube
{
  std::vector<int> lit; /* per variable: -1 absent, 0 negative, 1 positive */
  bool contains( uint32_t m ) const
  {
    for ( std::size_t v = 0; v < lit.size(); ++v )
      if ( lit[v] >= 0 && static_cast<int>( ( m >> v ) & 1u ) != lit[v] )
        return false;
    return true;
  }
};

inline uint32_t oracle_min_cubes( uint32_t n, std::vector<bool> const& on )
{
  std::vector<oracle_cube> all;
  uint32_t total = 1;
  for ( uint32_t i = 0; i < n; ++i )
    total *= 3;
  for ( uint32_t code = 0; code < total; ++code )
  {
    oracle_cube c{ std::vector<int>( n ) };
    uint32_t x = code;
    for ( uint32_t v = 0; v < n; ++v, x /= 3 )
      c.lit[v] = static_cast<int>( x % 3 ) - 1;
    bool implicant = true;
    for ( uint32_t m = 0; m < on.size() && implicant; ++m )
      if ( c.contains( m ) && !on[m] )
        implicant = false;
    if ( implicant )
      all.push_back( c );
  }
  /* primes: implicants not strictly contained in another implicant */
  auto within = []( oracle_cube const& a, oracle_cube const& b ) {
    for ( std::size_t v = 0; v < a.lit.size(); ++v )
      if ( b.lit[v] >= 0 && a.lit[v] != b.lit[v] )
        return false;
    return true;
  };
  std::vector<oracle_cube> primes;
  for ( std::size_t i = 0; i < all.size(); ++i )
  {
    bool prime = true;
    for ( std::size_t j = 0; j < all.size() && prime; ++j )
      if ( i != j && within( all[i], all[j] ) && !within( all[j], all[i] ) )
        prime = false;
    if ( prime )
      primes.push_back( all[i] );
  }

  std::vector<uint32_t> minterms;
  for ( uint32_t m = 0; m < on.size(); ++m )
    if ( on[m] )
      minterms.push_back( m );
  if ( minterms.empty() )
    return 0;

  std::function<bool( std::vector<bool>&, uint32_t )> search = [&]( std::vector<bool>& covered, uint32_t budget ) {
    std::size_t first = 0;
    while ( first < minterms.size() && covered[first] )
      ++first;
    if ( first == minterms.size() )
      return true;
    if ( budget == 0 )
      return false;
    for ( auto const& p : primes )
    {
      if ( !p.contains( minterms[first] ) )
        continue;
      auto saved = covered;
      for ( std::size_t k = 0; k < minterms.size(); ++k )
        if ( p.contains( minterms[k] ) )
          covered[k] = true;
      if ( search( covered, budget - 1 ) )
        return true;
      covered = saved;
    }
    return false;
  };
  for ( uint32_t k = 1;; ++k )
  {
    std::vector<bool> covered( minterms.size(), false );
    if ( search( covered, k ) )
      return k;
  }
}

} // namespace fluxsynth::test
