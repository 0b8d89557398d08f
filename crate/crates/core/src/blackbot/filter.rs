//! The bot's scan-target IP filter. A drawn address is skipped when any
//! exclusion clause matches: loopback, invalid, internal and IANA-reserved
//! space, multicast and above, plus the corporate and military first octets
//! the original filter carried.
//!
//! Two quirks are intentional and kept: the 172.16 clause spans o2 in
//! [16, 32) (a /12), and the 100.64 clause stops at o2 126, excluding
//! 100.127/16 even though the nominal /10 would include it. The link-local
//! clause tests o2 == 254 (the only value the broken original comparison
//! could ever have meant).

use crate::simkernel::Ipv4;

/// First octets excluded wholesale (Department of Defense blocks).
pub const DOD_FIRST_OCTETS: [u8; 13] = [6, 7, 11, 21, 22, 26, 28, 29, 30, 33, 55, 214, 215];

/// True when the bot is allowed to probe `a`; false when any exclusion
/// clause matches.
pub fn ip_is_scannable(a: Ipv4) -> bool {
    let [o1, o2, _, _] = a.octets();
    let excluded = o1 == 127                            // loopback
        || o1 == 0                                      // invalid address space
        || o1 == 3                                      // General Electric Company
        || o1 == 15 || o1 == 16                         // Hewlett-Packard Company
        || o1 == 56                                     // US Postal Service
        || o1 == 10                                     // internal network
        || (o1 == 192 && o2 == 168)                     // internal network
        || (o1 == 172 && (16..32).contains(&o2))        // internal network
        || (o1 == 100 && (64..127).contains(&o2))       // IANA NAT reserved
        || (o1 == 169 && o2 == 254)                     // link-local
        || (o1 == 198 && (18..20).contains(&o2))        // IANA special use
        || o1 >= 224                                    // multicast and above
        || DOD_FIRST_OCTETS.contains(&o1);
    !excluded
}
